#include "mirrorfield/tape.hpp"

#include <cmath>

namespace mirrorfield {

void Tape::Builder::begin_segment(double delta) {
  const auto e = static_cast<std::uint32_t>(ext_.size());
  const auto m = static_cast<std::uint32_t>(emit_.size());
  segments_.push_back({delta, e, e, m, m});
}

void Tape::Builder::add_extinction(std::uint32_t query, double weight) {
  ext_.push_back({query, weight});
  segments_.back().ext_end = static_cast<std::uint32_t>(ext_.size());
}

void Tape::Builder::add_emission(std::uint32_t query, double weight) {
  emit_.push_back({query, weight});
  segments_.back().emit_end = static_cast<std::uint32_t>(emit_.size());
}

void Tape::clear() {
  queries_.clear();
  samples_.clear();
  networks_.clear();
  ext_terms_.clear();
  emit_terms_.clear();
  segments_.clear();
  children_.clear();
  nodes_.clear();
}

std::uint32_t Tape::add_queries(std::span<const FieldQuery> qs, std::uint8_t network) {
  const auto base = static_cast<std::uint32_t>(queries_.size());
  queries_.insert(queries_.end(), qs.begin(), qs.end());
  samples_.resize(queries_.size());
  networks_.resize(queries_.size(), network);
  return base;
}

namespace {

struct SegmentValues {
  double extinction = 0;
  Vec3 emission;
};

SegmentValues evaluate_segment(const Tape::Segment& s, std::span<const Tape::Term> ext,
                               std::span<const Tape::Term> emit,
                               const std::vector<FieldSample>& samples) {
  SegmentValues v;
  for (std::uint32_t i = s.ext_begin; i < s.ext_end; ++i) {
    v.extinction += ext[i].weight * samples[ext[i].query].density;
  }
  for (std::uint32_t i = s.emit_begin; i < s.emit_end; ++i) {
    const FieldSample& fs = samples[emit[i].query];
    v.emission += (emit[i].weight * -std::expm1(-fs.density * s.delta)) * fs.color;
  }
  return v;
}

}  // namespace

std::vector<double> Tape::segment_weights(const Builder& b) const {
  std::vector<double> w;
  w.reserve(b.segments_.size());
  double log_t = 0;
  for (const Segment& s : b.segments_) {
    const SegmentValues v = evaluate_segment(s, b.ext_, b.emit_, samples_);
    const double od = v.extinction * s.delta;
    w.push_back(std::exp(log_t) * -std::expm1(-od));
    log_t -= od;
  }
  return w;
}

double Tape::builder_transmittance(const Builder& b) const {
  double log_t = 0;
  for (const Segment& s : b.segments_) {
    log_t -= evaluate_segment(s, b.ext_, b.emit_, samples_).extinction * s.delta;
  }
  return std::exp(log_t);
}

std::int32_t Tape::add_node(const Builder& b) {
  Node n;
  n.seg_begin = static_cast<std::uint32_t>(segments_.size());
  const auto ext_base = static_cast<std::uint32_t>(ext_terms_.size());
  const auto emit_base = static_cast<std::uint32_t>(emit_terms_.size());
  for (Segment s : b.segments_) {
    s.ext_begin += ext_base;
    s.ext_end += ext_base;
    s.emit_begin += emit_base;
    s.emit_end += emit_base;
    segments_.push_back(s);
  }
  n.seg_end = static_cast<std::uint32_t>(segments_.size());
  ext_terms_.insert(ext_terms_.end(), b.ext_.begin(), b.ext_.end());
  emit_terms_.insert(emit_terms_.end(), b.emit_.begin(), b.emit_.end());
  n.child_begin = static_cast<std::uint32_t>(children_.size());
  children_.insert(children_.end(), b.children_.begin(), b.children_.end());
  n.child_end = static_cast<std::uint32_t>(children_.size());
  n.tail_constant = b.tail_constant_;
  n.detach_extinction = b.detach_;
  nodes_.push_back(n);
  const auto id = static_cast<std::int32_t>(nodes_.size() - 1);

  // Forward value.
  Node& node = nodes_.back();
  double log_t = 0;
  Vec3 color;
  for (std::uint32_t k = node.seg_begin; k < node.seg_end; ++k) {
    const SegmentValues v = evaluate_segment(segments_[k], ext_terms_, emit_terms_, samples_);
    color += std::exp(log_t) * v.emission;
    log_t -= v.extinction * segments_[k].delta;
  }
  Vec3 tail = node.tail_constant;
  for (std::uint32_t c = node.child_begin; c < node.child_end; ++c) {
    tail += children_[c].weight * nodes_[static_cast<std::size_t>(children_[c].node)].value;
  }
  node.transmittance = std::exp(log_t);
  node.value = color + node.transmittance * tail;
  return id;
}

void Tape::replay() {
  for (Node& node : nodes_) {
    double log_t = 0;
    Vec3 color;
    for (std::uint32_t k = node.seg_begin; k < node.seg_end; ++k) {
      const SegmentValues v = evaluate_segment(segments_[k], ext_terms_, emit_terms_, samples_);
      color += std::exp(log_t) * v.emission;
      log_t -= v.extinction * segments_[k].delta;
    }
    Vec3 tail = node.tail_constant;
    for (std::uint32_t c = node.child_begin; c < node.child_end; ++c) {
      tail += children_[c].weight * nodes_[static_cast<std::size_t>(children_[c].node)].value;
    }
    node.transmittance = std::exp(log_t);
    node.value = color + node.transmittance * tail;
  }
}

std::vector<SampleAdjoint> Tape::backward(
    std::span<const std::pair<std::int32_t, Vec3>> roots) const {
  std::vector<SampleAdjoint> adj(queries_.size());
  std::vector<Vec3> node_adj(nodes_.size());
  for (const auto& [id, g] : roots) node_adj[static_cast<std::size_t>(id)] += g;

  std::vector<double> transmittance;
  std::vector<SegmentValues> values;
  for (std::size_t id = nodes_.size(); id-- > 0;) {
    const Vec3 g = node_adj[id];
    if (g.x == 0 && g.y == 0 && g.z == 0) continue;
    const Node& node = nodes_[id];

    const std::size_t count = node.seg_end - node.seg_begin;
    transmittance.resize(count);
    values.resize(count);
    double log_t = 0;
    for (std::size_t k = 0; k < count; ++k) {
      const Segment& s = segments_[node.seg_begin + k];
      values[k] = evaluate_segment(s, ext_terms_, emit_terms_, samples_);
      transmittance[k] = std::exp(log_t);
      log_t -= values[k].extinction * s.delta;
    }
    const double t_end = std::exp(log_t);
    Vec3 tail = node.tail_constant;
    for (std::uint32_t c = node.child_begin; c < node.child_end; ++c) {
      tail += children_[c].weight * nodes_[static_cast<std::size_t>(children_[c].node)].value;
    }

    // after = sum_{j>k} T_j g.E_j + T_end g.tail, built back to front.
    double after = t_end * dot(g, tail);
    for (std::size_t k = count; k-- > 0;) {
      const Segment& s = segments_[node.seg_begin + k];
      if (!node.detach_extinction) {
        const double d_ext = -s.delta * after;
        for (std::uint32_t i = s.ext_begin; i < s.ext_end; ++i) {
          adj[ext_terms_[i].query].density += ext_terms_[i].weight * d_ext;
        }
      }
      const Vec3 g_emit = transmittance[k] * g;
      for (std::uint32_t i = s.emit_begin; i < s.emit_end; ++i) {
        const Term& term = emit_terms_[i];
        const FieldSample& fs = samples_[term.query];
        const double survive = std::exp(-fs.density * s.delta);
        adj[term.query].density += term.weight * s.delta * survive * dot(fs.color, g_emit);
        adj[term.query].color += (term.weight * -std::expm1(-fs.density * s.delta)) * g_emit;
      }
      after += transmittance[k] * dot(g, values[k].emission);
    }
    for (std::uint32_t c = node.child_begin; c < node.child_end; ++c) {
      node_adj[static_cast<std::size_t>(children_[c].node)] += (children_[c].weight * t_end) * g;
    }
  }
  return adj;
}

}  // namespace mirrorfield
