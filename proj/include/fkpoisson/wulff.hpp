#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fkpoisson/census.hpp"
#include "fkpoisson/lattice.hpp"

namespace fkp {

inline constexpr double kDefaultRaster = 1.0 / 16.0;

/// Integer cell coordinates; cell k covers [(k - 1/2) h, (k + 1/2) h) per axis.
using Cell = std::array<std::int32_t, kMaxDim>;

/// Occupancy raster over a bounding box of cells.
class ShapeMask {
 public:
  ShapeMask() = default;
  ShapeMask(int dim, double h, std::vector<std::int32_t> lower, std::vector<std::int32_t> extent,
            std::vector<std::uint8_t> occupancy);
  /// Bounding-box raster of a cell set (empty sets give an empty mask).
  static ShapeMask from_cells(int dim, double h, std::span<const Cell> cells);

  int dim() const { return dim_; }
  double h() const { return h_; }
  const std::vector<std::int32_t>& lower() const { return lower_; }
  const std::vector<std::int32_t>& extent() const { return extent_; }
  const std::vector<std::uint8_t>& occupancy() const { return occ_; }
  std::size_t count() const;
  double volume() const;
  bool empty() const { return count() == 0; }
  bool contains(const Cell& c) const;
  /// Occupied cells, sorted.
  std::vector<Cell> cells() const;

  friend bool operator==(const ShapeMask&, const ShapeMask&) = default;

 private:
  int dim_ = 0;
  double h_ = kDefaultRaster;
  std::vector<std::int32_t> lower_;
  std::vector<std::int32_t> extent_;
  std::vector<std::uint8_t> occ_;
};

/// Cells whose centres lie in the half-open box [lo, hi).
std::vector<Cell> raster_box(int dim, double h, std::span<const double> lo,
                             std::span<const double> hi);
ShapeMask box_shape(int dim, double h, std::span<const double> lo, std::span<const double> hi);
/// Euclidean ball of the given radius centred at the origin.
ShapeMask ball_shape(int dim, double h, double radius);

/// Scales the shape about the origin by (theta * volume)^(-1/d), so that the
/// result has volume 1/theta up to raster error. Throws
/// std::invalid_argument unless theta in (0, 1] and the shape is nonempty.
ShapeMask renormalize(const ShapeMask& shape, double theta);

/// Union over y in `cluster` of the cube [y - f - 1/2, y + f + 1/2)^d,
/// multiplied by `scale` about the origin and rasterized at h.
std::vector<Cell> fatten_cells(std::span<const Site> cluster, int f, double h, double scale = 1.0);
ShapeMask fatten(std::span<const Site> cluster, int f, double h = kDefaultRaster,
                 double scale = 1.0);

/// ceil(ln(n)^2).
int default_fattening(std::size_t n);

double symmetric_difference_volume(const ShapeMask& a, const ShapeMask& b);
double symmetric_difference_volume(int dim, double h, std::span<const Cell> a,
                                   std::span<const Cell> b);

struct ShapeDiagnostic {
  std::size_t n = 0;
  int f = 0;
  double cluster_scale = 0.0;
  double volume = 0.0;
  double delta = 0.0;
  std::size_t centers = 0;
  bool indicator = false;  ///< volume > 0 and volume >= delta * centers
};

/// Symmetric difference between the union of x + W over marked x and the
/// union of the fattened clusters scaled by `cluster_scale` (default 1/n),
/// both on W's raster.
ShapeDiagnostic symmetric_difference_stat(const PointField& centers,
                                          std::span<const std::vector<Site>> clusters,
                                          const ShapeMask& w, std::size_t n,
                                          std::optional<int> f, double delta,
                                          std::optional<double> cluster_scale = std::nullopt);

/// Site lists of the clusters marked by the plain point process.
std::vector<std::vector<Site>> marked_clusters(const ClusterSet& cs, std::size_t n, Finiteness rule);

/// Average occupancy of the n-large clusters, each re-centred at its mass
/// centre and scaled by n^(-1/d), thresholded at 1/2. Throws
/// std::invalid_argument when fewer than `min_clusters` clusters qualify.
ShapeMask empirical_shape(std::span<const ClusterSet> samples, std::size_t n, Finiteness rule,
                          double h = kDefaultRaster, std::size_t min_clusters = 1);

/// Text header "SHAPEMASK 1", then d and h, lower cells, extents, and the
/// run lengths of the bitmap starting with a run of empty cells.
void write_shape(std::ostream& os, const ShapeMask& mask);
ShapeMask read_shape(std::istream& is);

}  // namespace fkp
