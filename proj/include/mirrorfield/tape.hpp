#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mirrorfield/field.hpp"
#include "mirrorfield/mlp.hpp"
#include "mirrorfield/vec.hpp"

namespace mirrorfield {

// Record of one rendering computation, kept so that it can be replayed and
// differentiated with respect to the field outputs.
//
// Every radiance value produced by the integrator is a node of the form
//
//   value = sum_k T_k E_k + T_end * (tail_constant + sum_c w_c value(child_c))
//   T_k   = exp(-sum_{j<k} e_j delta_j),  T_end = T_K
//
// where the segment extinction e_k = sum w sigma_q and emission
// E_k = sum w (1 - exp(-sigma_q delta_k)) c_q run over recorded field
// queries q. Plain quadrature has one query per segment with weight one; the
// reordered reflection estimator has several BRDF-weighted queries per
// segment. Children are always recorded before their parents.
class Tape {
 public:
  struct Term {
    std::uint32_t query;
    double weight;
  };
  struct Segment {
    double delta;
    std::uint32_t ext_begin, ext_end;
    std::uint32_t emit_begin, emit_end;
  };
  struct Child {
    std::int32_t node;
    double weight;
  };
  struct Node {
    std::uint32_t seg_begin, seg_end;
    std::uint32_t child_begin, child_end;
    Vec3 tail_constant;
    // Extinction terms get no gradient (transmittance treated as constant).
    bool detach_extinction = false;
    Vec3 value;
    double transmittance = 1.0;
  };

  // Node under construction; appended to the tape in one piece.
  class Builder {
   public:
    void begin_segment(double delta);
    void add_extinction(std::uint32_t query, double weight);
    void add_emission(std::uint32_t query, double weight);
    void add_child(std::int32_t node, double weight) { children_.push_back({node, weight}); }
    void add_tail_constant(const Vec3& c) { tail_constant_ += c; }
    void set_detach_extinction(bool d) { detach_ = d; }
    std::size_t segment_count() const { return segments_.size(); }

   private:
    friend class Tape;
    std::vector<Segment> segments_;
    std::vector<Term> ext_, emit_;
    std::vector<Child> children_;
    Vec3 tail_constant_;
    bool detach_ = false;
  };

  void clear();

  // Appends queries tagged with `network` (0 = fine/shared, 1 = coarse) and
  // returns the index of the first. Samples must be filled by the caller.
  std::uint32_t add_queries(std::span<const FieldQuery> qs, std::uint8_t network);

  // Per-segment weights T_k (1 - exp(-e_k delta_k)) of a node in progress.
  std::vector<double> segment_weights(const Builder& b) const;
  // Transmittance after every segment of a node in progress.
  double builder_transmittance(const Builder& b) const;

  std::int32_t add_node(const Builder& b);

  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t node_count() const { return nodes_.size(); }

  std::vector<FieldQuery>& queries() { return queries_; }
  const std::vector<FieldQuery>& queries() const { return queries_; }
  std::vector<FieldSample>& samples() { return samples_; }
  const std::vector<FieldSample>& samples() const { return samples_; }
  const std::vector<std::uint8_t>& networks() const { return networks_; }

  // Recomputes every node value from the current samples (after the samples
  // were replaced, e.g. by re-evaluating a perturbed field).
  void replay();

  // Propagates adjoints of node values down to the field outputs. `roots`
  // pairs node ids with dLoss/dvalue; the result has one entry per query.
  std::vector<SampleAdjoint> backward(std::span<const std::pair<std::int32_t, Vec3>> roots) const;

 private:
  std::vector<FieldQuery> queries_;
  std::vector<FieldSample> samples_;
  std::vector<std::uint8_t> networks_;
  std::vector<Term> ext_terms_, emit_terms_;
  std::vector<Segment> segments_;
  std::vector<Child> children_;
  std::vector<Node> nodes_;
};

}  // namespace mirrorfield
