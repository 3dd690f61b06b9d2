#include "mirrorfield/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mirrorfield/error.hpp"

namespace mirrorfield {

void check_finite(const FieldQuery& q) {
  if (!isfinite(q.position) || !isfinite(q.direction)) {
    throw Error(ErrorKind::NonFiniteQuery, "field query with non-finite position or direction");
  }
}

void RadianceField::query_batch(std::span<const FieldQuery> qs, std::span<FieldSample> out) const {
  if (qs.size() != out.size()) {
    throw Error(ErrorKind::ShapeMismatch, "query_batch: " + std::to_string(qs.size()) +
                                              " queries but " + std::to_string(out.size()) +
                                              " outputs");
  }
  for (std::size_t i = 0; i < qs.size(); ++i) out[i] = query(qs[i]);
}

void positional_encode(std::span<const double> x, int levels, std::span<double> out) {
  std::size_t o = 0;
  // Higher levels by angle doubling; the error grows like 2^l ulp.
  for (const double xi : x) {
    double s = std::sin(kPi * xi);
    double c = std::cos(kPi * xi);
    for (int l = 0; l < levels; ++l) {
      out[o++] = s;
      out[o++] = c;
      const double s2 = 2.0 * s * c;
      c = (c - s) * (c + s);
      s = s2;
    }
  }
}

std::vector<double> positional_encode(std::span<const double> x, int levels) {
  if (levels < 0) throw Error(ErrorKind::InvalidArgument, "negative encoding level count");
  std::vector<double> out(2 * static_cast<std::size_t>(levels) * x.size());
  positional_encode(x, levels, out);
  return out;
}

// ---------------------------------------------------------------------------

AnalyticField AnalyticField::constant(double density, const Vec3& color) {
  AnalyticField f;
  f.add_everywhere(density, color);
  return f;
}

AnalyticField& AnalyticField::add_box(const Vec3& box_min, const Vec3& box_max, double density,
                                      const Vec3& color) {
  media_.push_back({true, box_min, box_max, density, color});
  return *this;
}

AnalyticField& AnalyticField::add_everywhere(double density, const Vec3& color) {
  media_.push_back({false, {}, {}, density, color});
  return *this;
}

FieldSample AnalyticField::query(const FieldQuery& q) const {
  check_finite(q);
  FieldSample s;
  Vec3 weighted;
  for (const Medium& m : media_) {
    if (m.bounded) {
      const Vec3& p = q.position;
      if (p.x < m.box_min.x || p.x > m.box_max.x || p.y < m.box_min.y || p.y > m.box_max.y ||
          p.z < m.box_min.z || p.z > m.box_max.z) {
        continue;
      }
    }
    s.density += m.density;
    weighted += m.density * m.color;
  }
  if (s.density > 0) s.color = weighted / s.density;
  return s;
}

// ---------------------------------------------------------------------------

VoxelGridField::VoxelGridField(std::array<int, 3> resolution, const Vec3& bounds_min,
                               const Vec3& bounds_max)
    : resolution_(resolution), min_(bounds_min), max_(bounds_max) {
  for (int a = 0; a < 3; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    if (resolution[ua] < 1) throw Error(ErrorKind::InvalidArgument, "grid resolution must be >= 1");
    if (!(bounds_max[ua] > bounds_min[ua])) {
      throw Error(ErrorKind::InvalidArgument, "grid bounds are degenerate");
    }
    cell_size_[ua] = (bounds_max[ua] - bounds_min[ua]) / resolution[ua];
  }
  const std::size_t n = static_cast<std::size_t>(resolution[0]) *
                        static_cast<std::size_t>(resolution[1]) *
                        static_cast<std::size_t>(resolution[2]);
  density_.assign(n, 0.0);
  color_.assign(n, Vec3{});
}

VoxelGridField VoxelGridField::from_field(const RadianceField& source,
                                          std::array<int, 3> resolution, const Vec3& bounds_min,
                                          const Vec3& bounds_max) {
  VoxelGridField grid(resolution, bounds_min, bounds_max);
  for (int k = 0; k < resolution[2]; ++k) {
    for (int j = 0; j < resolution[1]; ++j) {
      for (int i = 0; i < resolution[0]; ++i) {
        const FieldSample s = source.query({grid.cell_center(i, j, k), {0, 0, 1}});
        grid.set_cell(i, j, k, s.density, s.color);
      }
    }
  }
  return grid;
}

std::size_t VoxelGridField::index(int i, int j, int k) const {
  return (static_cast<std::size_t>(k) * static_cast<std::size_t>(resolution_[1]) +
          static_cast<std::size_t>(j)) *
             static_cast<std::size_t>(resolution_[0]) +
         static_cast<std::size_t>(i);
}

Vec3 VoxelGridField::cell_center(int i, int j, int k) const {
  return {min_.x + (i + 0.5) * cell_size_.x, min_.y + (j + 0.5) * cell_size_.y,
          min_.z + (k + 0.5) * cell_size_.z};
}

void VoxelGridField::set_cell(int i, int j, int k, double density, const Vec3& color) {
  if (density < 0) throw Error(ErrorKind::InvalidArgument, "negative grid density");
  density_[index(i, j, k)] = density;
  color_[index(i, j, k)] = color;
}

FieldSample VoxelGridField::cell(int i, int j, int k) const {
  return {density_[index(i, j, k)], color_[index(i, j, k)]};
}

FieldSample VoxelGridField::query(const FieldQuery& q) const {
  check_finite(q);
  const Vec3& p = q.position;
  if (p.x < min_.x || p.x > max_.x || p.y < min_.y || p.y > max_.y || p.z < min_.z ||
      p.z > max_.z) {
    return {};
  }
  std::array<int, 3> i0{};
  std::array<int, 3> i1{};
  std::array<double, 3> w{};
  for (std::size_t a = 0; a < 3; ++a) {
    const double g = (p[a] - min_[a]) / cell_size_[a] - 0.5;
    const int n = resolution_[a];
    const double clamped = std::clamp(g, 0.0, static_cast<double>(n - 1));
    const int lo = std::min(static_cast<int>(std::floor(clamped)), n - 1);
    i0[a] = lo;
    i1[a] = std::min(lo + 1, n - 1);
    w[a] = clamped - lo;
  }
  FieldSample s;
  for (int c = 0; c < 8; ++c) {
    const int ii = (c & 1) ? i1[0] : i0[0];
    const int jj = (c & 2) ? i1[1] : i0[1];
    const int kk = (c & 4) ? i1[2] : i0[2];
    const double weight = ((c & 1) ? w[0] : 1 - w[0]) * ((c & 2) ? w[1] : 1 - w[1]) *
                          ((c & 4) ? w[2] : 1 - w[2]);
    if (weight == 0) continue;
    const std::size_t idx = index(ii, jj, kk);
    s.density += weight * density_[idx];
    s.color += weight * color_[idx];
  }
  return s;
}

// ---------------------------------------------------------------------------

FieldSample CountingField::query(const FieldQuery& q) const {
  count_.fetch_add(1, std::memory_order_relaxed);
  return inner_->query(q);
}

void CountingField::query_batch(std::span<const FieldQuery> qs, std::span<FieldSample> out) const {
  count_.fetch_add(qs.size(), std::memory_order_relaxed);
  inner_->query_batch(qs, out);
}

}  // namespace mirrorfield
