#include "mirrorfield/mlp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "mirrorfield/error.hpp"
#include "mirrorfield/rng.hpp"

namespace mirrorfield {

namespace {

struct LayerShape {
  int in;
  int out;
};

// Order of layers in the flat parameter vector; each layer stores its
// weights column-major (out x in) followed by its bias (out).
std::vector<LayerShape> layer_shapes(const MlpArchitecture& a) {
  const int p = a.encoding.position_dim();
  const int d = a.encoding.direction_dim();
  std::vector<LayerShape> shapes;
  for (int l = 0; l < a.hidden_layers; ++l) {
    int in = l == 0 ? p : a.width;
    if (l > 0 && l == a.skip_layer) in += p;
    shapes.push_back({in, a.width});
  }
  shapes.push_back({a.width, 1});                // density
  shapes.push_back({a.width, a.width});          // feature
  shapes.push_back({a.width + d, a.color_width});  // color hidden
  shapes.push_back({a.color_width, 3});          // color out
  return shapes;
}

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using ConstMap = Eigen::Map<const Mat<S>>;

template <typename S>
using VecMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

template <typename S>
S softplus(S z) {
  return z > S(20) ? z : std::log1p(std::exp(z));
}

template <typename S>
S logistic(S z) {
  return S(1) / (S(1) + std::exp(-z));
}

template <typename S>
struct LayerView {
  ConstMap<S> w;
  VecMap<S> b;
};

template <typename S>
std::vector<LayerView<S>> views(const MlpArchitecture& a, const S* params) {
  std::vector<LayerView<S>> out;
  std::size_t off = 0;
  for (const LayerShape& s : layer_shapes(a)) {
    const S* w = params + off;
    off += static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out);
    const S* b = params + off;
    off += static_cast<std::size_t>(s.out);
    out.push_back({ConstMap<S>(w, s.out, s.in), VecMap<S>(b, s.out)});
  }
  return out;
}

template <typename S>
void apply_activation(Activation act, Mat<S>& z) {
  if (act == Activation::Relu) {
    z = z.cwiseMax(S(0));
  } else {
    z = z.unaryExpr([](S v) { return softplus(v); });
  }
}

// Derivative of the activation, expressed through the pre-activation.
template <typename S>
Mat<S> activation_grad(Activation act, const Mat<S>& z) {
  if (act == Activation::Relu) return (z.array() > S(0)).template cast<S>().matrix();
  return z.unaryExpr([](S v) { return logistic(v); });
}

template <typename S>
void encode_inputs(const MlpArchitecture& a, std::span<const FieldQuery> qs, Mat<S>& pos,
                   Mat<S>& dir) {
  const EncodingConfig& e = a.encoding;
  const auto n = static_cast<Eigen::Index>(qs.size());
  pos.resize(e.position_dim(), n);
  dir.resize(e.direction_dim(), n);
  std::vector<double> buf(static_cast<std::size_t>(std::max(e.position_dim(), e.direction_dim())));
  for (Eigen::Index c = 0; c < n; ++c) {
    const FieldQuery& q = qs[static_cast<std::size_t>(c)];
    check_finite(q);
    const double px[3] = {q.position.x, q.position.y, q.position.z};
    const double dx[3] = {q.direction.x, q.direction.y, q.direction.z};

    const int np = 6 * e.levels_position;
    positional_encode(px, e.levels_position, std::span<double>(buf.data(), static_cast<std::size_t>(np)));
    for (int r = 0; r < np; ++r) pos(r, c) = static_cast<S>(buf[static_cast<std::size_t>(r)]);
    if (e.include_raw) {
      for (int r = 0; r < 3; ++r) pos(np + r, c) = static_cast<S>(px[r]);
    }
    const int nd = 6 * e.levels_direction;
    positional_encode(dx, e.levels_direction, std::span<double>(buf.data(), static_cast<std::size_t>(nd)));
    for (int r = 0; r < nd; ++r) dir(r, c) = static_cast<S>(buf[static_cast<std::size_t>(r)]);
    if (e.include_raw) {
      for (int r = 0; r < 3; ++r) dir(nd + r, c) = static_cast<S>(dx[r]);
    }
  }
}

// Activations of one forward pass over a block of queries (columns).
template <typename S>
struct Forward {
  Mat<S> pos, dir;
  std::vector<Mat<S>> inputs;  // input of each trunk layer
  std::vector<Mat<S>> pre;     // pre-activation of each trunk layer
  Mat<S> trunk;                // output of the last trunk layer
  Mat<S> density_pre;          // 1 x n
  Mat<S> color_in;             // [feature; dir]
  Mat<S> color_hidden_pre;
  Mat<S> color_hidden;
  Mat<S> color;                // 3 x n after the sigmoid
};

template <typename S>
void forward(const MlpArchitecture& a, const std::vector<LayerView<S>>& layers,
             std::span<const FieldQuery> qs, Forward<S>& f) {
  encode_inputs(a, qs, f.pos, f.dir);
  const auto n = f.pos.cols();
  f.inputs.resize(static_cast<std::size_t>(a.hidden_layers));
  f.pre.resize(static_cast<std::size_t>(a.hidden_layers));
  f.trunk = f.pos;
  for (int l = 0; l < a.hidden_layers; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    Mat<S>& in = f.inputs[ul];
    if (l > 0 && l == a.skip_layer) {
      in.resize(f.trunk.rows() + f.pos.rows(), n);
      in.topRows(f.trunk.rows()) = f.trunk;
      in.bottomRows(f.pos.rows()) = f.pos;
    } else {
      in = f.trunk;
    }
    f.pre[ul].noalias() = layers[ul].w * in;
    f.pre[ul].colwise() += layers[ul].b;
    f.trunk = f.pre[ul];
    apply_activation(a.hidden_activation, f.trunk);
  }
  const std::size_t base = static_cast<std::size_t>(a.hidden_layers);
  const LayerView<S>& dens = layers[base];
  const LayerView<S>& feat = layers[base + 1];
  const LayerView<S>& ch = layers[base + 2];
  const LayerView<S>& co = layers[base + 3];

  f.density_pre.noalias() = dens.w * f.trunk;
  f.density_pre.colwise() += dens.b;

  f.color_in.resize(a.width + f.dir.rows(), n);
  f.color_in.topRows(a.width).noalias() = feat.w * f.trunk;
  f.color_in.topRows(a.width).colwise() += feat.b;
  f.color_in.bottomRows(f.dir.rows()) = f.dir;

  f.color_hidden_pre.noalias() = ch.w * f.color_in;
  f.color_hidden_pre.colwise() += ch.b;
  f.color_hidden = f.color_hidden_pre;
  apply_activation(a.hidden_activation, f.color_hidden);

  f.color.noalias() = co.w * f.color_hidden;
  f.color.colwise() += co.b;
  f.color = f.color.unaryExpr([](S v) { return logistic(v); });
}

template <typename S>
void evaluate(const MlpArchitecture& a, const S* params, std::span<const FieldQuery> qs,
              std::span<FieldSample> out) {
  const auto layers = views<S>(a, params);
  Forward<S> f;
  for (std::size_t start = 0; start < qs.size(); start += MlpField::kBlock) {
    const std::size_t count = std::min(MlpField::kBlock, qs.size() - start);
    forward(a, layers, qs.subspan(start, count), f);
    for (std::size_t c = 0; c < count; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      FieldSample& s = out[start + c];
      s.density = static_cast<double>(softplus(f.density_pre(0, ci)));
      s.color = {static_cast<double>(f.color(0, ci)), static_cast<double>(f.color(1, ci)),
                 static_cast<double>(f.color(2, ci))};
    }
  }
}

template <typename S>
void backward_block(const MlpArchitecture& a, const std::vector<LayerView<S>>& layers,
                    std::span<const FieldQuery> qs, std::span<const SampleAdjoint> up,
                    std::span<double> gradient) {
  Forward<S> f;
  forward(a, layers, qs, f);
  const auto n = static_cast<Eigen::Index>(qs.size());
  const auto shapes = layer_shapes(a);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const LayerShape& s : shapes) {
    offsets.push_back(off);
    off += static_cast<std::size_t>(s.in + 1) * static_cast<std::size_t>(s.out);
  }
  auto add_layer_grad = [&](std::size_t layer, const Mat<S>& dz, const Mat<S>& input) {
    const LayerShape& s = shapes[layer];
    const Mat<S> gw = dz * input.transpose();
    const Eigen::Matrix<S, Eigen::Dynamic, 1> gb = dz.rowwise().sum();
    double* g = gradient.data() + offsets[layer];
    for (int c = 0; c < s.in; ++c) {
      for (int r = 0; r < s.out; ++r) *g++ += static_cast<double>(gw(r, c));
    }
    for (int r = 0; r < s.out; ++r) *g++ += static_cast<double>(gb(r));
  };

  Mat<S> d_density(1, n);
  Mat<S> d_color(3, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const SampleAdjoint& u = up[static_cast<std::size_t>(c)];
    d_density(0, c) = static_cast<S>(u.density) * logistic(f.density_pre(0, c));
    for (int k = 0; k < 3; ++k) {
      const S col = f.color(k, c);
      d_color(k, c) = static_cast<S>(u.color[static_cast<std::size_t>(k)]) * col * (S(1) - col);
    }
  }
  const std::size_t base = static_cast<std::size_t>(a.hidden_layers);

  add_layer_grad(base + 3, d_color, f.color_hidden);
  Mat<S> d_ch = layers[base + 3].w.transpose() * d_color;
  d_ch = d_ch.cwiseProduct(activation_grad(a.hidden_activation, f.color_hidden_pre));
  add_layer_grad(base + 2, d_ch, f.color_in);
  const Mat<S> d_color_in = layers[base + 2].w.transpose() * d_ch;
  const Mat<S> d_feature = d_color_in.topRows(a.width);
  add_layer_grad(base + 1, d_feature, f.trunk);
  add_layer_grad(base, d_density, f.trunk);

  Mat<S> d_h = layers[base + 1].w.transpose() * d_feature;
  d_h.noalias() += layers[base].w.transpose() * d_density;

  for (int l = a.hidden_layers - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    const Mat<S> dz = d_h.cwiseProduct(activation_grad(a.hidden_activation, f.pre[ul]));
    add_layer_grad(ul, dz, f.inputs[ul]);
    if (l == 0) break;
    const Mat<S> d_in = layers[ul].w.transpose() * dz;
    d_h = d_in.topRows(a.width);
  }
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_le(std::ifstream& in, int bytes, const std::filesystem::path& path) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) {
    throw Error(ErrorKind::Data, "truncated checkpoint " + path.string());
  }
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t MlpArchitecture::parameter_count() const {
  std::size_t n = 0;
  for (const LayerShape& s : layer_shapes(*this)) {
    n += static_cast<std::size_t>(s.in + 1) * static_cast<std::size_t>(s.out);
  }
  return n;
}

void MlpArchitecture::validate() const {
  if (hidden_layers < 1 || width < 1 || color_width < 1) {
    throw Error(ErrorKind::Config, "MLP needs at least one hidden layer and positive widths");
  }
  if (encoding.levels_position < 0 || encoding.levels_direction < 0) {
    throw Error(ErrorKind::Config, "encoding levels must be >= 0");
  }
  if (encoding.position_dim() == 0 || encoding.direction_dim() == 0) {
    throw Error(ErrorKind::Config, "network inputs would be empty");
  }
}

bool operator==(const MlpArchitecture& a, const MlpArchitecture& b) {
  return a.hidden_layers == b.hidden_layers && a.width == b.width &&
         a.skip_layer == b.skip_layer && a.color_width == b.color_width &&
         a.hidden_activation == b.hidden_activation &&
         a.encoding.levels_position == b.encoding.levels_position &&
         a.encoding.levels_direction == b.encoding.levels_direction &&
         a.encoding.include_raw == b.encoding.include_raw;
}

MlpField::MlpField(const MlpArchitecture& architecture, std::vector<double> parameters)
    : arch_(architecture) {
  arch_.validate();
  set_parameters(std::move(parameters));
}

MlpField MlpField::init(const MlpArchitecture& architecture, std::uint64_t seed) {
  architecture.validate();
  std::vector<double> params;
  params.reserve(architecture.parameter_count());
  Rng rng(seed, 0x6d6c70ULL);
  for (const LayerShape& s : layer_shapes(architecture)) {
    const double limit = std::sqrt(6.0 / (s.in + s.out));
    for (int i = 0; i < s.in * s.out; ++i) {
      params.push_back(static_cast<float>((2.0 * rng.uniform() - 1.0) * limit));
    }
    for (int i = 0; i < s.out; ++i) params.push_back(0.0);
  }
  return MlpField(architecture, std::move(params));
}

void MlpField::set_parameters(std::vector<double> parameters) {
  if (parameters.size() != arch_.parameter_count()) {
    throw Error(ErrorKind::ShapeMismatch, "MLP expects " + std::to_string(arch_.parameter_count()) +
                                              " parameters, got " +
                                              std::to_string(parameters.size()));
  }
  params_ = std::move(parameters);
  if (precision_ == Precision::Float32) {
    params_f32_.assign(params_.begin(), params_.end());
  }
}

void MlpField::set_precision(Precision p) {
  precision_ = p;
  if (p == Precision::Float32) {
    params_f32_.assign(params_.begin(), params_.end());
  } else {
    params_f32_.clear();
  }
}

FieldSample MlpField::query(const FieldQuery& q) const {
  FieldSample s;
  query_batch(std::span<const FieldQuery>(&q, 1), std::span<FieldSample>(&s, 1));
  return s;
}

void MlpField::query_batch(std::span<const FieldQuery> qs, std::span<FieldSample> out) const {
  if (qs.size() != out.size()) {
    throw Error(ErrorKind::ShapeMismatch, "query_batch size mismatch");
  }
  if (precision_ == Precision::Float32) {
    evaluate<float>(arch_, params_f32_.data(), qs, out);
  } else {
    evaluate<double>(arch_, params_.data(), qs, out);
  }
}

void MlpField::accumulate_gradient(std::span<const FieldQuery> qs,
                                   std::span<const SampleAdjoint> upstream,
                                   std::span<double> gradient) const {
  if (qs.size() != upstream.size()) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(qs.size()) + " queries but " +
                                              std::to_string(upstream.size()) + " adjoints");
  }
  if (gradient.size() != params_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient buffer has " +
                                              std::to_string(gradient.size()) + " entries, need " +
                                              std::to_string(params_.size()));
  }
  for (std::size_t start = 0; start < qs.size(); start += kBlock) {
    const std::size_t count = std::min(kBlock, qs.size() - start);
    if (precision_ == Precision::Float32) {
      backward_block<float>(arch_, views<float>(arch_, params_f32_.data()),
                            qs.subspan(start, count), upstream.subspan(start, count), gradient);
    } else {
      backward_block<double>(arch_, views<double>(arch_, params_.data()),
                             qs.subspan(start, count), upstream.subspan(start, count), gradient);
    }
  }
}

std::vector<double> MlpField::query_batch_with_gradients(
    std::span<const FieldQuery> qs, std::span<const SampleAdjoint> upstream) const {
  std::vector<double> gradient(params_.size(), 0.0);
  accumulate_gradient(qs, upstream, gradient);
  return gradient;
}

void save_checkpoint(const std::filesystem::path& path, const MlpField& field) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  const MlpArchitecture& a = field.architecture();
  out.write("MFCK", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(a.hidden_layers));
  put_u32(out, static_cast<std::uint32_t>(a.width));
  put_u32(out, static_cast<std::uint32_t>(a.skip_layer));
  put_u32(out, static_cast<std::uint32_t>(a.color_width));
  put_u32(out, static_cast<std::uint32_t>(a.hidden_activation));
  put_u32(out, static_cast<std::uint32_t>(a.encoding.levels_position));
  put_u32(out, static_cast<std::uint32_t>(a.encoding.levels_direction));
  put_u32(out, a.encoding.include_raw ? 1u : 0u);
  put_u64(out, field.parameters().size());
  for (const double p : field.parameters()) {
    const float f = static_cast<float>(p);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

MlpField load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MFCK", 4) != 0) {
    throw Error(ErrorKind::Data, path.string() + " is not a field checkpoint");
  }
  const auto version = get_le(in, 4, path);
  if (version != 1) {
    throw Error(ErrorKind::Data, "unsupported checkpoint version " + std::to_string(version));
  }
  MlpArchitecture a;
  a.hidden_layers = static_cast<int>(get_le(in, 4, path));
  a.width = static_cast<int>(get_le(in, 4, path));
  a.skip_layer = static_cast<int>(get_le(in, 4, path));
  a.color_width = static_cast<int>(get_le(in, 4, path));
  a.hidden_activation = static_cast<Activation>(get_le(in, 4, path));
  a.encoding.levels_position = static_cast<int>(get_le(in, 4, path));
  a.encoding.levels_direction = static_cast<int>(get_le(in, 4, path));
  a.encoding.include_raw = get_le(in, 4, path) != 0;
  const auto count = get_le(in, 8, path);
  a.validate();
  if (count != a.parameter_count()) {
    throw Error(ErrorKind::Data, "checkpoint parameter count " + std::to_string(count) +
                                     " does not match its architecture");
  }
  std::vector<double> params(count);
  for (double& p : params) {
    const auto bits = static_cast<std::uint32_t>(get_le(in, 4, path));
    float f;
    std::memcpy(&f, &bits, 4);
    p = f;
  }
  return MlpField(a, std::move(params));
}

}  // namespace mirrorfield
