#include "hgr/seqnet/layers.hpp"

#include <cmath>
#include <sstream>

#include "hgr/core_model.hpp"
#include "hgr/text_io.hpp"

namespace hgr::seqnet {

void Tensor::init_uniform(double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : values) v = dist(rng);
}

SequenceLayout SequenceLayout::from_lengths(const std::vector<std::size_t>& lengths) {
  SequenceLayout l;
  for (const auto n : lengths) l.offsets.push_back(l.offsets.back() + n);
  return l;
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::None, Activation::Tanh, Activation::Relu}) {
    if (activation_name(a) == name) return a;
  }
  throw Error("unknown activation '" + std::string(name) + "'");
}

namespace {

void apply_activation(Matrix& z, Activation act) {
  switch (act) {
    case Activation::None: break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Relu: z = z.array().max(0.0).matrix(); break;
  }
}

/// grad through the activation, expressed via its output y.
Matrix activation_backward(const Matrix& grad, const Matrix& y, Activation act) {
  switch (act) {
    case Activation::None: return grad;
    case Activation::Tanh: return (grad.array() * (1.0 - y.array().square())).matrix();
    case Activation::Relu: return (grad.array() * (y.array() > 0.0).cast<double>()).matrix();
  }
  return grad;
}

RowVector sigmoid(const RowVector& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }

std::map<std::string, std::string, std::less<>> parse_description(std::string_view text,
                                                                   std::string& kind) {
  std::map<std::string, std::string, std::less<>> kv;
  std::istringstream in{std::string(text)};
  in >> kind;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw Error("bad layer field '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

std::size_t field(const std::map<std::string, std::string, std::less<>>& kv, std::string_view key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error("layer description lacks '" + std::string(key) + "'");
  return parse_number<std::size_t>(it->second, "layer", 0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out, bool bias, Activation act)
    : weight_("weight", out, in), bias_("bias", 1, bias ? out : 0), has_bias_(bias), act_(act) {}

Matrix Dense::forward(const Matrix& x, const SequenceLayout& /*layout*/, Mode mode, LayerCache& cache) const {
  if (static_cast<std::size_t>(x.cols()) != input_width()) {
    throw Error("dense: input width " + std::to_string(x.cols()) + ", expected " + std::to_string(input_width()));
  }
  Matrix y = x * weight_.mat().transpose();
  if (has_bias_) y.rowwise() += bias_.vec();
  apply_activation(y, act_);
  cache.mode = mode;
  cache.slots = {x, y};
  return y;
}

Matrix Dense::backward(const Matrix& grad_out, const SequenceLayout& /*layout*/, const LayerCache& cache) {
  const Matrix& x = cache.slots[0];
  const Matrix dz = activation_backward(grad_out, cache.slots[1], act_);
  weight_.grad_mat().noalias() += dz.transpose() * x;
  if (has_bias_) bias_.grad_vec() += dz.colwise().sum();
  return dz * weight_.mat();
}

std::vector<Tensor*> Dense::parameters() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

void Dense::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_width()));
  weight_.init_uniform(bound, rng);
  if (has_bias_) bias_.init_uniform(bound, rng);
}

std::string Dense::describe() const {
  std::ostringstream s;
  s << "dense in=" << input_width() << " out=" << output_width() << " bias=" << (has_bias_ ? 1 : 0)
    << " act=" << activation_name(act_);
  return s.str();
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(std::size_t width, double momentum, double eps)
    : gamma_("gamma", 1, width),
      beta_("beta", 1, width),
      running_mean_("running_mean", 1, width),
      running_var_("running_var", 1, width),
      momentum_(momentum),
      eps_(eps) {
  std::fill(gamma_.values.begin(), gamma_.values.end(), 1.0);
  std::fill(running_var_.values.begin(), running_var_.values.end(), 1.0);
}

Matrix BatchNorm::forward(const Matrix& x, const SequenceLayout& /*layout*/, Mode mode, LayerCache& cache) const {
  if (static_cast<std::size_t>(x.cols()) != input_width()) {
    throw Error("batch_norm: input width " + std::to_string(x.cols()) + ", expected " +
                std::to_string(input_width()));
  }
  cache.mode = mode;
  RowVector mean, var;
  if (mode == Mode::Train) {
    if (x.rows() == 0) throw Error("batch_norm: empty batch");
    mean = x.colwise().mean();
    var = (x.rowwise() - mean).array().square().colwise().mean().matrix();
  } else {
    mean = running_mean_.vec();
    var = running_var_.vec();
  }
  const RowVector inv_std = (var.array() + eps_).rsqrt().matrix();
  Matrix xhat = ((x.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
  Matrix y = (xhat.array().rowwise() * gamma_.vec().array()).matrix();
  y.rowwise() += beta_.vec();
  cache.slots = {std::move(xhat), inv_std, mean, var};
  return y;
}

Matrix BatchNorm::backward(const Matrix& grad_out, const SequenceLayout& /*layout*/, const LayerCache& cache) {
  const Matrix& xhat = cache.slots[0];
  const RowVector inv_std = cache.slots[1];
  gamma_.grad_vec() += (grad_out.array() * xhat.array()).colwise().sum().matrix();
  beta_.grad_vec() += grad_out.colwise().sum();
  const Matrix dxhat = (grad_out.array().rowwise() * gamma_.vec().array()).matrix();
  if (cache.mode == Mode::Infer) return (dxhat.array().rowwise() * inv_std.array()).matrix();

  const double n = static_cast<double>(grad_out.rows());
  const RowVector sum1 = dxhat.colwise().sum();
  const RowVector sum2 = (dxhat.array() * xhat.array()).colwise().sum().matrix();
  Matrix dx = n * dxhat;
  dx.rowwise() -= sum1;
  dx -= (xhat.array().rowwise() * sum2.array()).matrix();
  return ((dx.array().rowwise() * inv_std.array()) / n).matrix();
}

void BatchNorm::commit(const LayerCache& cache) {
  if (cache.mode != Mode::Train) return;
  running_mean_.vec() = momentum_ * running_mean_.vec() + (1.0 - momentum_) * RowVector(cache.slots[2]);
  running_var_.vec() = momentum_ * running_var_.vec() + (1.0 - momentum_) * RowVector(cache.slots[3]);
}

void BatchNorm::init(std::mt19937_64& /*rng*/) {
  std::fill(gamma_.values.begin(), gamma_.values.end(), 1.0);
  std::fill(beta_.values.begin(), beta_.values.end(), 0.0);
  std::fill(running_mean_.values.begin(), running_mean_.values.end(), 0.0);
  std::fill(running_var_.values.begin(), running_var_.values.end(), 1.0);
}

std::string BatchNorm::describe() const { return "batch_norm width=" + std::to_string(input_width()); }

// ---------------------------------------------------------------------------
// GRU

GruCellParams::GruCellParams(std::size_t input, std::size_t hidden)
    : input_size(input),
      hidden_size(hidden),
      w_xr("w_xr", hidden, input), w_hr("w_hr", hidden, hidden),
      w_xu("w_xu", hidden, input), w_hu("w_hu", hidden, hidden),
      w_xc("w_xc", hidden, input), w_hc("w_hc", hidden, hidden),
      b_xr("b_xr", 1, hidden), b_hr("b_hr", 1, hidden),
      b_xu("b_xu", 1, hidden), b_hu("b_hu", 1, hidden),
      b_xc("b_xc", 1, hidden), b_hc("b_hc", 1, hidden) {}

std::vector<Tensor*> GruCellParams::all() {
  return {&w_xr, &w_hr, &w_xu, &w_hu, &w_xc, &w_hc, &b_xr, &b_hr, &b_xu, &b_hu, &b_xc, &b_hc};
}

GruStep gru_cell_forward(const GruCellParams& p, const RowVector& x, const RowVector& h_prev) {
  if (static_cast<std::size_t>(x.size()) != p.input_size || static_cast<std::size_t>(h_prev.size()) != p.hidden_size) {
    throw Error("gru_cell_forward: dimension mismatch");
  }
  GruStep s;
  s.r = sigmoid(x * p.w_xr.mat().transpose() + p.b_xr.vec() + h_prev * p.w_hr.mat().transpose() + p.b_hr.vec());
  s.u = sigmoid(x * p.w_xu.mat().transpose() + p.b_xu.vec() + h_prev * p.w_hu.mat().transpose() + p.b_hu.vec());
  const RowVector nh = h_prev * p.w_hc.mat().transpose() + p.b_hc.vec();
  s.c = (x * p.w_xc.mat().transpose() + p.b_xc.vec() + RowVector(s.r.array() * nh.array())).array().tanh().matrix();
  s.h = (s.u.array() * h_prev.array() + (1.0 - s.u.array()) * s.c.array()).matrix();
  return s;
}

Gru::Gru(std::size_t in, std::size_t hidden) : p_(in, hidden) {}

Matrix Gru::forward(const Matrix& x, const SequenceLayout& layout, Mode mode, LayerCache& cache) const {
  if (static_cast<std::size_t>(x.cols()) != p_.input_size) {
    throw Error("gru: input width " + std::to_string(x.cols()) + ", expected " + std::to_string(p_.input_size));
  }
  const long rows = x.rows();
  const long hs = static_cast<long>(p_.hidden_size);
  Matrix xr = x * p_.w_xr.mat().transpose();
  xr.rowwise() += p_.b_xr.vec() + p_.b_hr.vec();
  Matrix xu = x * p_.w_xu.mat().transpose();
  xu.rowwise() += p_.b_xu.vec() + p_.b_hu.vec();
  Matrix xc = x * p_.w_xc.mat().transpose();
  xc.rowwise() += p_.b_xc.vec();

  Matrix h_prev = Matrix::Zero(rows, hs);
  Matrix r(rows, hs), u(rows, hs), c(rows, hs), nh(rows, hs), h(rows, hs);
  const auto whr = p_.w_hr.mat().transpose();
  const auto whu = p_.w_hu.mat().transpose();
  const auto whc = p_.w_hc.mat().transpose();
  RowVector hp(hs);
  for (std::size_t s = 0; s < layout.sequence_count(); ++s) {
    const long b = static_cast<long>(layout.begin(s));
    const long n = static_cast<long>(layout.length(s));
    hp.setZero();
    for (long t = 0; t < n; ++t) {
      const long row = b + t;
      h_prev.row(row) = hp;
      r.row(row) = sigmoid(xr.row(row) + hp * whr);
      u.row(row) = sigmoid(xu.row(row) + hp * whu);
      nh.row(row) = hp * whc + p_.b_hc.vec();
      c.row(row) = (xc.row(row).array() + r.row(row).array() * nh.row(row).array()).tanh();
      h.row(row) = u.row(row).array() * hp.array() + (1.0 - u.row(row).array()) * c.row(row).array();
      hp = h.row(row);
    }
  }
  cache.mode = mode;
  cache.slots = {x, std::move(h_prev), std::move(r), std::move(u), std::move(c), std::move(nh)};
  return h;
}

Matrix Gru::backward(const Matrix& grad_out, const SequenceLayout& layout, const LayerCache& cache) {
  const Matrix& x = cache.slots[0];
  const Matrix& h_prev = cache.slots[1];
  const Matrix& r = cache.slots[2];
  const Matrix& u = cache.slots[3];
  const Matrix& c = cache.slots[4];
  const Matrix& nh = cache.slots[5];
  const long rows = x.rows();
  const long hs = static_cast<long>(p_.hidden_size);

  Matrix dar(rows, hs), dau(rows, hs), dac(rows, hs), dnh(rows, hs);
  const auto whr = p_.w_hr.mat();
  const auto whu = p_.w_hu.mat();
  const auto whc = p_.w_hc.mat();
  RowVector carry(hs);
  for (std::size_t s = 0; s < layout.sequence_count(); ++s) {
    const long b = static_cast<long>(layout.begin(s));
    const long n = static_cast<long>(layout.length(s));
    carry.setZero();
    for (long t = n - 1; t >= 0; --t) {
      const long row = b + t;
      const RowVector dh = grad_out.row(row) + carry;
      const auto ur = u.row(row).array();
      const auto cr = c.row(row).array();
      const auto rr = r.row(row).array();
      const RowVector du = (dh.array() * (h_prev.row(row).array() - cr)).matrix();
      const RowVector dc = (dh.array() * (1.0 - ur)).matrix();
      dac.row(row) = dc.array() * (1.0 - cr.square());
      dnh.row(row) = dac.row(row).array() * rr;
      dar.row(row) = dac.row(row).array() * nh.row(row).array() * rr * (1.0 - rr);
      dau.row(row) = du.array() * ur * (1.0 - ur);
      carry = (dh.array() * ur).matrix() + dar.row(row) * whr + dau.row(row) * whu + dnh.row(row) * whc;
    }
  }

  p_.w_xr.grad_mat().noalias() += dar.transpose() * x;
  p_.w_xu.grad_mat().noalias() += dau.transpose() * x;
  p_.w_xc.grad_mat().noalias() += dac.transpose() * x;
  p_.w_hr.grad_mat().noalias() += dar.transpose() * h_prev;
  p_.w_hu.grad_mat().noalias() += dau.transpose() * h_prev;
  p_.w_hc.grad_mat().noalias() += dnh.transpose() * h_prev;
  const RowVector sr = dar.colwise().sum();
  const RowVector su = dau.colwise().sum();
  p_.b_xr.grad_vec() += sr;
  p_.b_hr.grad_vec() += sr;
  p_.b_xu.grad_vec() += su;
  p_.b_hu.grad_vec() += su;
  p_.b_xc.grad_vec() += dac.colwise().sum();
  p_.b_hc.grad_vec() += dnh.colwise().sum();

  Matrix dx = dar * p_.w_xr.mat();
  dx.noalias() += dau * p_.w_xu.mat();
  dx.noalias() += dac * p_.w_xc.mat();
  return dx;
}

void Gru::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p_.hidden_size));
  for (Tensor* t : p_.all()) t->init_uniform(bound, rng);
}

std::string Gru::describe() const {
  return "gru in=" + std::to_string(p_.input_size) + " hidden=" + std::to_string(p_.hidden_size);
}

// ---------------------------------------------------------------------------
// Temporal shift

Matrix temporal_shift(const Matrix& x, const SequenceLayout& layout, std::size_t distance) {
  const long k = static_cast<long>(shifted_features(static_cast<std::size_t>(x.cols())));
  Matrix out = x;
  const long dist = static_cast<long>(distance);
  for (std::size_t s = 0; s < layout.sequence_count(); ++s) {
    const long b = static_cast<long>(layout.begin(s));
    const long n = static_cast<long>(layout.length(s));
    for (long t = n - 1; t >= 0; --t) {
      if (t >= dist) out.row(b + t).head(k) = x.row(b + t - dist).head(k);
      else out.row(b + t).head(k).setZero();
    }
  }
  return out;
}

Matrix temporal_shift_backward(const Matrix& grad, const SequenceLayout& layout, std::size_t distance) {
  const long k = static_cast<long>(shifted_features(static_cast<std::size_t>(grad.cols())));
  Matrix out = grad;
  const long dist = static_cast<long>(distance);
  for (std::size_t s = 0; s < layout.sequence_count(); ++s) {
    const long b = static_cast<long>(layout.begin(s));
    const long n = static_cast<long>(layout.length(s));
    for (long t = 0; t < n; ++t) {
      if (t + dist < n) out.row(b + t).head(k) = grad.row(b + t + dist).head(k);
      else out.row(b + t).head(k).setZero();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shift node

ShiftNode::ShiftNode(std::size_t in, std::size_t out, Activation act, std::size_t distance)
    : shift_fc_(in, out, true, Activation::None),
      residual_fc_(in, out, false, Activation::None),
      norm_(out),
      act_(act),
      distance_(distance) {}

Matrix ShiftNode::forward(const Matrix& x, const SequenceLayout& layout, Mode mode, LayerCache& cache) const {
  if (static_cast<std::size_t>(x.cols()) != input_width()) {
    throw Error("shift_node: input width " + std::to_string(x.cols()) + ", expected " +
                std::to_string(input_width()));
  }
  cache.mode = mode;
  cache.children.resize(3);
  const Matrix shifted = temporal_shift(x, layout, distance_);
  Matrix z = shift_fc_.forward(shifted, layout, mode, cache.children[0]);
  z += residual_fc_.forward(x, layout, mode, cache.children[1]);
  Matrix y = norm_.forward(z, layout, mode, cache.children[2]);
  apply_activation(y, act_);
  cache.slots = {y};
  return y;
}

Matrix ShiftNode::backward(const Matrix& grad_out, const SequenceLayout& layout, const LayerCache& cache) {
  const Matrix dy = activation_backward(grad_out, cache.slots[0], act_);
  const Matrix dz = norm_.backward(dy, layout, cache.children[2]);
  const Matrix dshifted = shift_fc_.backward(dz, layout, cache.children[0]);
  Matrix dx = residual_fc_.backward(dz, layout, cache.children[1]);
  dx += temporal_shift_backward(dshifted, layout, distance_);
  return dx;
}

void ShiftNode::commit(const LayerCache& cache) { norm_.commit(cache.children[2]); }

std::vector<Tensor*> ShiftNode::parameters() {
  std::vector<Tensor*> out = shift_fc_.parameters();
  for (Tensor* t : residual_fc_.parameters()) out.push_back(t);
  for (Tensor* t : norm_.parameters()) out.push_back(t);
  return out;
}

void ShiftNode::init(std::mt19937_64& rng) {
  shift_fc_.init(rng);
  residual_fc_.init(rng);
  norm_.init(rng);
}

std::string ShiftNode::describe() const {
  std::ostringstream s;
  s << "shift_node in=" << input_width() << " out=" << output_width() << " act=" << activation_name(act_)
    << " distance=" << distance_;
  return s.str();
}

// ---------------------------------------------------------------------------

std::unique_ptr<Layer> make_layer(std::string_view description) {
  std::string kind;
  const auto kv = parse_description(description, kind);
  auto text = [&](std::string_view key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error("layer description lacks '" + std::string(key) + "'");
    return it->second;
  };
  if (kind == "dense") {
    return std::make_unique<Dense>(field(kv, "in"), field(kv, "out"), field(kv, "bias") != 0,
                                   parse_activation(text("act")));
  }
  if (kind == "batch_norm") return std::make_unique<BatchNorm>(field(kv, "width"));
  if (kind == "gru") return std::make_unique<Gru>(field(kv, "in"), field(kv, "hidden"));
  if (kind == "shift_node") {
    return std::make_unique<ShiftNode>(field(kv, "in"), field(kv, "out"), parse_activation(text("act")),
                                       field(kv, "distance"));
  }
  throw Error("unknown layer kind '" + kind + "'");
}

}  // namespace hgr::seqnet
