#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "mirrorfield/vec.hpp"

namespace mirrorfield {

struct FieldQuery {
  Vec3 position;
  Vec3 direction{0, 0, 1};
};

struct FieldSample {
  double density = 0;  // per scene unit, >= 0
  Vec3 color;          // linear RGB in [0, 1]
};

// Throws NonFiniteQuery if the position or direction has a NaN/inf entry.
void check_finite(const FieldQuery& q);

// Density + view-dependent color. Implementations must be safe to query
// concurrently from any number of threads.
class RadianceField {
 public:
  virtual ~RadianceField() = default;

  virtual FieldSample query(const FieldQuery& q) const = 0;
  // out.size() must equal qs.size().
  virtual void query_batch(std::span<const FieldQuery> qs, std::span<FieldSample> out) const;
};

// (sin(2^l pi x_j), cos(2^l pi x_j)) for l = 0..L-1, component-major: all
// levels of x_0 first, then x_1, ... Output length 2 * L * x.size().
std::vector<double> positional_encode(std::span<const double> x, int levels);
// Writes the same values into `out` (size 2 * levels * x.size()).
void positional_encode(std::span<const double> x, int levels, std::span<double> out);

// Sum of homogeneous media, each either unbounded or confined to an
// axis-aligned box. Overlapping media add densities; the color is the
// density-weighted mean.
class AnalyticField final : public RadianceField {
 public:
  struct Medium {
    bool bounded = false;
    Vec3 box_min, box_max;
    double density = 0;
    Vec3 color;
  };

  AnalyticField() = default;
  static AnalyticField constant(double density, const Vec3& color);

  AnalyticField& add_box(const Vec3& box_min, const Vec3& box_max, double density,
                         const Vec3& color);
  AnalyticField& add_everywhere(double density, const Vec3& color);

  const std::vector<Medium>& media() const { return media_; }

  FieldSample query(const FieldQuery& q) const override;

 private:
  std::vector<Medium> media_;
};

// Density and RGB stored at cell centers of an axis-aligned lattice and
// interpolated trilinearly. Positions inside the bounds but beyond the outer
// cell centers clamp to the border values; outside the bounds the field is
// empty. Color is view independent.
class VoxelGridField final : public RadianceField {
 public:
  VoxelGridField(std::array<int, 3> resolution, const Vec3& bounds_min, const Vec3& bounds_max);

  // Samples `source` at every cell center (direction +Z).
  static VoxelGridField from_field(const RadianceField& source, std::array<int, 3> resolution,
                                   const Vec3& bounds_min, const Vec3& bounds_max);

  std::array<int, 3> resolution() const { return resolution_; }
  Vec3 cell_center(int i, int j, int k) const;
  void set_cell(int i, int j, int k, double density, const Vec3& color);
  FieldSample cell(int i, int j, int k) const;

  FieldSample query(const FieldQuery& q) const override;

 private:
  std::size_t index(int i, int j, int k) const;

  std::array<int, 3> resolution_;
  Vec3 min_, max_, cell_size_;
  std::vector<double> density_;
  std::vector<Vec3> color_;
};

// Forwards to another field and counts evaluations.
class CountingField final : public RadianceField {
 public:
  explicit CountingField(const RadianceField& inner) : inner_(&inner) {}

  FieldSample query(const FieldQuery& q) const override;
  void query_batch(std::span<const FieldQuery> qs, std::span<FieldSample> out) const override;

  std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }
  void reset() { count_.store(0, std::memory_order_relaxed); }

 private:
  const RadianceField* inner_;
  mutable std::atomic<std::uint64_t> count_{0};
};

}  // namespace mirrorfield
