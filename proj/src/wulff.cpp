#include "fkpoisson/wulff.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

namespace fkp {

namespace {

constexpr double kEps = 1e-9;

std::size_t cell_offset(const std::vector<std::int32_t>& lower, const std::vector<std::int32_t>& extent,
                        const Cell& c) {
  std::size_t off = 0;
  for (std::size_t a = 0; a < lower.size(); ++a) {
    off = off * static_cast<std::size_t>(extent[a]) + static_cast<std::size_t>(c[a] - lower[a]);
  }
  return off;
}

void normalize(std::vector<Cell>& cells) {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
}

}  // namespace

ShapeMask::ShapeMask(int dim, double h, std::vector<std::int32_t> lower,
                     std::vector<std::int32_t> extent, std::vector<std::uint8_t> occupancy)
    : dim_(dim), h_(h), lower_(std::move(lower)), extent_(std::move(extent)), occ_(std::move(occupancy)) {
  if (dim_ < 1 || dim_ > kMaxDim) throw std::invalid_argument("shape dimension out of range");
  if (!(h_ > 0.0)) throw std::invalid_argument("raster resolution must be positive");
  if (lower_.size() != static_cast<std::size_t>(dim_) || extent_.size() != lower_.size()) {
    throw std::invalid_argument("shape bounds do not match the dimension");
  }
  std::size_t cells = 1;
  for (std::int32_t e : extent_) {
    if (e < 0) throw std::invalid_argument("negative shape extent");
    cells *= static_cast<std::size_t>(e);
  }
  if (occ_.size() != cells) throw std::invalid_argument("occupancy size does not match the extents");
}

ShapeMask ShapeMask::from_cells(int dim, double h, std::span<const Cell> cells) {
  std::vector<std::int32_t> lo(dim, 0), ext(dim, 0);
  if (cells.empty()) return ShapeMask(dim, h, lo, ext, {});
  std::vector<std::int32_t> hi(dim);
  for (int a = 0; a < dim; ++a) lo[a] = hi[a] = cells.front()[a];
  for (const Cell& c : cells) {
    for (int a = 0; a < dim; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) {
    ext[a] = hi[a] - lo[a] + 1;
    total *= static_cast<std::size_t>(ext[a]);
  }
  std::vector<std::uint8_t> occ(total, 0);
  for (const Cell& c : cells) occ[cell_offset(lo, ext, c)] = 1;
  return ShapeMask(dim, h, lo, ext, std::move(occ));
}

std::size_t ShapeMask::count() const {
  return static_cast<std::size_t>(std::count(occ_.begin(), occ_.end(), 1));
}

double ShapeMask::volume() const {
  return static_cast<double>(count()) * std::pow(h_, dim_);
}

bool ShapeMask::contains(const Cell& c) const {
  for (int a = 0; a < dim_; ++a) {
    if (c[a] < lower_[a] || c[a] >= lower_[a] + extent_[a]) return false;
  }
  return occ_[cell_offset(lower_, extent_, c)] != 0;
}

std::vector<Cell> ShapeMask::cells() const {
  std::vector<Cell> out;
  if (occ_.empty()) return out;
  Cell c{};
  for (int a = 0; a < dim_; ++a) c[a] = lower_[a];
  for (std::size_t i = 0; i < occ_.size(); ++i) {
    if (occ_[i]) out.push_back(c);
    for (int a = dim_ - 1; a >= 0; --a) {
      if (++c[a] < lower_[a] + extent_[a]) break;
      c[a] = lower_[a];
    }
  }
  return out;
}

std::vector<Cell> raster_box(int dim, double h, std::span<const double> lo,
                             std::span<const double> hi) {
  std::array<std::int32_t, kMaxDim> from{}, to{};
  for (int a = 0; a < dim; ++a) {
    from[a] = static_cast<std::int32_t>(std::ceil(lo[a] / h - kEps));
    to[a] = static_cast<std::int32_t>(std::ceil(hi[a] / h - kEps)) - 1;
    if (to[a] < from[a]) return {};
  }
  std::vector<Cell> out;
  Cell c{};
  for (int a = 0; a < dim; ++a) c[a] = from[a];
  while (true) {
    out.push_back(c);
    int a = dim - 1;
    while (a >= 0 && c[a] == to[a]) {
      c[a] = from[a];
      --a;
    }
    if (a < 0) break;
    ++c[a];
  }
  return out;
}

ShapeMask box_shape(int dim, double h, std::span<const double> lo, std::span<const double> hi) {
  return ShapeMask::from_cells(dim, h, raster_box(dim, h, lo, hi));
}

ShapeMask ball_shape(int dim, double h, double radius) {
  std::vector<double> lo(dim, -radius), hi(dim, radius + h);
  std::vector<Cell> cells;
  for (const Cell& c : raster_box(dim, h, lo, hi)) {
    double r2 = 0.0;
    for (int a = 0; a < dim; ++a) r2 += (c[a] * h) * (c[a] * h);
    if (r2 <= radius * radius) cells.push_back(c);
  }
  return ShapeMask::from_cells(dim, h, cells);
}

ShapeMask renormalize(const ShapeMask& shape, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("renormalization needs theta in (0, 1]");
  const double vol = shape.volume();
  if (!(vol > 0.0)) throw std::invalid_argument("cannot renormalize an empty shape");
  const int d = shape.dim();
  const double h = shape.h();
  const double s = std::pow(theta * vol, -1.0 / d);
  std::vector<double> lo(d), hi(d);
  for (int a = 0; a < d; ++a) {
    const double x0 = (shape.lower()[a] - 0.5) * h * s;
    const double x1 = (shape.lower()[a] + shape.extent()[a] - 0.5) * h * s;
    lo[a] = std::min(x0, x1) - h;
    hi[a] = std::max(x0, x1) + h;
  }
  std::vector<Cell> cells;
  for (const Cell& c : raster_box(d, h, lo, hi)) {
    Cell src{};
    for (int a = 0; a < d; ++a) src[a] = static_cast<std::int32_t>(std::lround(c[a] / s));
    if (shape.contains(src)) cells.push_back(c);
  }
  return ShapeMask::from_cells(d, h, cells);
}

std::vector<Cell> fatten_cells(std::span<const Site> cluster, int f, double h, double scale) {
  if (f < 0) throw std::invalid_argument("fattening radius must be nonnegative");
  if (!(scale > 0.0)) throw std::invalid_argument("cluster scale must be positive");
  std::vector<Cell> cells;
  if (cluster.empty()) return cells;
  const int d = cluster.front().dim();
  std::vector<double> lo(d), hi(d);
  for (const Site& y : cluster) {
    for (int a = 0; a < d; ++a) {
      lo[a] = (y[a] - f - 0.5) * scale;
      hi[a] = (y[a] + f + 0.5) * scale;
    }
    auto box = raster_box(d, h, lo, hi);
    cells.insert(cells.end(), box.begin(), box.end());
  }
  normalize(cells);
  return cells;
}

ShapeMask fatten(std::span<const Site> cluster, int f, double h, double scale) {
  const int d = cluster.empty() ? 2 : cluster.front().dim();
  const auto cells = fatten_cells(cluster, f, h, scale);
  return ShapeMask::from_cells(d, h, cells);
}

int default_fattening(std::size_t n) {
  if (n < 1) throw std::invalid_argument("fattening needs n >= 1");
  const double l = std::log(static_cast<double>(n));
  return static_cast<int>(std::ceil(l * l - kEps));
}

double symmetric_difference_volume(int dim, double h, std::span<const Cell> a,
                                   std::span<const Cell> b) {
  std::vector<Cell> x(a.begin(), a.end()), y(b.begin(), b.end());
  normalize(x);
  normalize(y);
  std::size_t only = 0;
  std::size_t i = 0, j = 0;
  while (i < x.size() || j < y.size()) {
    if (j == y.size() || (i < x.size() && x[i] < y[j])) {
      ++only;
      ++i;
    } else if (i == x.size() || y[j] < x[i]) {
      ++only;
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
  return static_cast<double>(only) * std::pow(h, dim);
}

double symmetric_difference_volume(const ShapeMask& a, const ShapeMask& b) {
  if (a.dim() != b.dim() || a.h() != b.h()) {
    throw std::invalid_argument("symmetric difference needs masks on the same raster");
  }
  const auto ca = a.cells();
  const auto cb = b.cells();
  return symmetric_difference_volume(a.dim(), a.h(), ca, cb);
}

ShapeDiagnostic symmetric_difference_stat(const PointField& centers,
                                          std::span<const std::vector<Site>> clusters,
                                          const ShapeMask& w, std::size_t n,
                                          std::optional<int> f, double delta,
                                          std::optional<double> cluster_scale) {
  if (n < 1) throw std::invalid_argument("shape statistic needs n >= 1");
  if (delta < 0.0) throw std::invalid_argument("delta must be nonnegative");
  const int d = centers.box.dim();
  if (w.dim() != d) throw std::invalid_argument("shape and box dimensions differ");
  const double h = w.h();
  ShapeDiagnostic out;
  out.n = n;
  out.f = f ? *f : default_fattening(n);
  out.cluster_scale = cluster_scale ? *cluster_scale : 1.0 / static_cast<double>(n);
  out.delta = delta;

  const std::vector<Cell> shape = w.cells();
  std::vector<Cell> translated;
  for (std::size_t i = 0; i < centers.x.size(); ++i) {
    if (!centers.x[i]) continue;
    ++out.centers;
    const Site x = centers.box.site(i);
    Cell shift{};
    for (int a = 0; a < d; ++a) shift[a] = static_cast<std::int32_t>(std::lround(x[a] / h));
    for (Cell c : shape) {
      for (int a = 0; a < d; ++a) c[a] += shift[a];
      translated.push_back(c);
    }
  }
  std::vector<Cell> fattened;
  for (const auto& c : clusters) {
    auto cells = fatten_cells(c, out.f, h, out.cluster_scale);
    fattened.insert(fattened.end(), cells.begin(), cells.end());
  }
  out.volume = symmetric_difference_volume(d, h, translated, fattened);
  out.indicator = out.volume > 0.0 && out.volume >= delta * static_cast<double>(out.centers);
  return out;
}

std::vector<std::vector<Site>> marked_clusters(const ClusterSet& cs, std::size_t n, Finiteness rule) {
  std::vector<std::vector<Site>> out;
  for (const Cluster& c : cs.clusters) {
    if (qualifies(c, n, PointVariant::kPlain, rule)) out.push_back(cs.sites_of(c));
  }
  return out;
}

ShapeMask empirical_shape(std::span<const ClusterSet> samples, std::size_t n, Finiteness rule,
                          double h, std::size_t min_clusters) {
  if (n < 1) throw std::invalid_argument("empirical_shape needs n >= 1");
  if (samples.empty()) throw std::invalid_argument("empirical_shape needs samples");
  const int d = samples.front().box.dim();
  const double s = std::pow(static_cast<double>(n), -1.0 / d);
  std::map<Cell, std::size_t> votes;
  std::size_t clusters = 0;
  for (const ClusterSet& cs : samples) {
    for (const Cluster& c : cs.clusters) {
      if (!qualifies(c, n, PointVariant::kPlain, rule)) continue;
      ++clusters;
      std::vector<Site> rel;
      for (std::size_t i : c.sites) rel.push_back(cs.box.site(i) - c.mass_center);
      for (const Cell& cell : fatten_cells(rel, 0, h, s)) ++votes[cell];
    }
  }
  if (clusters < min_clusters) {
    throw std::invalid_argument("empirical_shape found " + std::to_string(clusters) +
                                " qualifying clusters, needs " + std::to_string(min_clusters));
  }
  std::vector<Cell> cells;
  for (const auto& [cell, v] : votes) {
    if (2 * v >= clusters) cells.push_back(cell);
  }
  return ShapeMask::from_cells(d, h, cells);
}

void write_shape(std::ostream& os, const ShapeMask& m) {
  os << "SHAPEMASK 1\n" << m.dim() << ' ' << std::setprecision(17) << m.h() << '\n';
  for (int a = 0; a < m.dim(); ++a) os << (a ? " " : "") << m.lower()[a];
  os << '\n';
  for (int a = 0; a < m.dim(); ++a) os << (a ? " " : "") << m.extent()[a];
  os << '\n';
  std::vector<std::size_t> runs;
  std::uint8_t cur = 0;
  std::size_t len = 0;
  for (std::uint8_t v : m.occupancy()) {
    if ((v != 0) == (cur != 0)) {
      ++len;
    } else {
      runs.push_back(len);
      cur = v ? 1 : 0;
      len = 1;
    }
  }
  runs.push_back(len);
  os << runs.size();
  for (std::size_t r : runs) os << ' ' << r;
  os << '\n';
}

ShapeMask read_shape(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "SHAPEMASK" || version != 1) {
    throw std::runtime_error("not a version-1 shape mask");
  }
  int d = 0;
  double h = 0.0;
  if (!(is >> d >> h) || d < 1 || d > kMaxDim) throw std::runtime_error("bad shape header");
  std::vector<std::int32_t> lo(d), ext(d);
  for (auto& v : lo) is >> v;
  for (auto& v : ext) is >> v;
  std::size_t nruns = 0;
  if (!(is >> nruns)) throw std::runtime_error("truncated shape mask");
  std::vector<std::uint8_t> occ;
  for (std::size_t r = 0; r < nruns; ++r) {
    std::size_t len = 0;
    if (!(is >> len)) throw std::runtime_error("truncated shape mask");
    occ.insert(occ.end(), len, static_cast<std::uint8_t>(r % 2));
  }
  return ShapeMask(d, h, lo, ext, std::move(occ));
}

}  // namespace fkp
