#include "umae/model.hpp"

#include <cmath>

#include "umae/error.hpp"
#include "umae/random.hpp"

namespace umae {
namespace {

constexpr const char* kModule = "model";

Eigen::Index affine_size(const Affine& a) { return a.W.size() + a.b.size(); }

struct EncoderCache {
  Eigen::VectorXd x;
  Eigen::VectorXd hidden;  // tanh activations (mlp only)
  Eigen::VectorXd z;       // pre-normalization output
  Eigen::VectorXd f;
  double z_norm = 1.0;
};

EncoderCache forward_encoder(const EncoderDecoder& m, const View& v) {
  const auto& p = m.params();
  EncoderCache c;
  c.x = m.embed(v);
  if (m.config().arch == Arch::Linear) {
    c.z = p.encoder[0].W * c.x + p.encoder[0].b;
  } else {
    c.hidden = (p.encoder[0].W * c.x + p.encoder[0].b).array().tanh().matrix();
    c.z = p.encoder[1].W * c.hidden + p.encoder[1].b;
  }
  if (m.config().normalize_encoder) {
    c.z_norm = c.z.norm();
    if (!(c.z_norm >= 1e-12)) throw NumericalError(kModule, "encoder output has zero norm");
    c.f = c.z / c.z_norm;
  } else {
    c.f = c.z;
  }
  return c;
}

void backward_encoder(const EncoderDecoder& m, const EncoderCache& c, const Eigen::VectorXd& df,
                      ParamSet& grad) {
  const auto& p = m.params();
  Eigen::VectorXd dz = df;
  if (m.config().normalize_encoder) dz = (df - c.f * c.f.dot(df)) / c.z_norm;
  if (m.config().arch == Arch::Linear) {
    grad.encoder[0].W.noalias() += dz * c.x.transpose();
    grad.encoder[0].b += dz;
  } else {
    grad.encoder[1].W.noalias() += dz * c.hidden.transpose();
    grad.encoder[1].b += dz;
    const Eigen::VectorXd dh = p.encoder[1].W.transpose() * dz;
    const Eigen::VectorXd da = dh.array() * (1.0 - c.hidden.array().square());
    grad.encoder[0].W.noalias() += da * c.x.transpose();
    grad.encoder[0].b += da;
  }
}

std::vector<Eigen::Index> slice_indices(const std::vector<int>& positions, int s) {
  std::vector<Eigen::Index> idx;
  idx.reserve(positions.size() * static_cast<std::size_t>(s));
  for (int pos : positions)
    for (int d = 0; d < s; ++d) idx.push_back(static_cast<Eigen::Index>(pos) * s + d);
  return idx;
}

// Normalized decoder slice for a given feature vector, plus the pieces backprop needs.
struct DecoderCache {
  std::vector<Eigen::Index> idx;
  Eigen::VectorXd h;
  double r_norm = 1.0;
};

DecoderCache forward_decoder(const EncoderDecoder& m, const Eigen::VectorXd& f,
                             const std::vector<int>& target_positions) {
  DecoderCache c;
  c.idx = slice_indices(target_positions, m.config().s);
  const Eigen::VectorXd y = m.decode(f);
  Eigen::VectorXd r(static_cast<Eigen::Index>(c.idx.size()));
  for (std::size_t t = 0; t < c.idx.size(); ++t) r[static_cast<Eigen::Index>(t)] = y[c.idx[t]];
  c.r_norm = r.norm();
  if (!(c.r_norm >= 1e-12))
    throw NumericalError(kModule, "degenerate reconstruction: decoder slice norm " + std::to_string(c.r_norm));
  c.h = r / c.r_norm;
  return c;
}

// Accumulates decoder gradients for dL/dh and returns dL/df.
Eigen::VectorXd backward_decoder(const EncoderDecoder& m, const Eigen::VectorXd& f,
                                 const DecoderCache& c, const Eigen::VectorXd& dh, ParamSet& grad) {
  const Eigen::VectorXd dr = (dh - c.h * c.h.dot(dh)) / c.r_norm;
  Eigen::VectorXd dy = Eigen::VectorXd::Zero(m.config().output_dim());
  for (std::size_t t = 0; t < c.idx.size(); ++t) dy[c.idx[t]] = dr[static_cast<Eigen::Index>(t)];
  grad.decoder.W.noalias() += dy * f.transpose();
  grad.decoder.b += dy;
  return m.params().decoder.W.transpose() * dy;
}

struct RawSample {
  const View* view;
  Eigen::VectorXd target;
  double weight;
};

// Gradient of sum_b w_b ||slice(g(f(x_b))) - t_b||^2 with an unnormalized slice.
ParamSet raw_fit_gradients(const EncoderDecoder& m, const std::vector<RawSample>& samples) {
  ParamSet grad = m.params().zeros_like();
  const int s = m.config().s;
  for (const auto& sample : samples) {
    const EncoderCache c = forward_encoder(m, *sample.view);
    const Eigen::VectorXd y = m.decode(c.f);
    const auto idx = slice_indices(sample.view->positions(), s);
    Eigen::VectorXd dy = Eigen::VectorXd::Zero(y.size());
    for (std::size_t t = 0; t < idx.size(); ++t)
      dy[idx[t]] = 2.0 * sample.weight * (y[idx[t]] - sample.target[static_cast<Eigen::Index>(t)]);
    grad.decoder.W.noalias() += dy * c.f.transpose();
    grad.decoder.b += dy;
    backward_encoder(m, c, m.params().decoder.W.transpose() * dy, grad);
  }
  return grad;
}

Affine glorot(int fan_out, int fan_in, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  Affine layer;
  layer.W.resize(fan_out, fan_in);
  for (int r = 0; r < fan_out; ++r)
    for (int c = 0; c < fan_in; ++c) layer.W(r, c) = uniform_real(rng, -a, a);
  layer.b.resize(fan_out);
  for (int r = 0; r < fan_out; ++r) layer.b[r] = uniform_real(rng, -a, a);
  return layer;
}

nlohmann::json affine_to_json(const std::string& name, const Affine& a) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(a.W.size()));
  for (Eigen::Index r = 0; r < a.W.rows(); ++r)
    for (Eigen::Index c = 0; c < a.W.cols(); ++c) w.push_back(a.W(r, c));
  return {{"name", name},
          {"rows", a.W.rows()},
          {"cols", a.W.cols()},
          {"weight", w},
          {"bias", std::vector<double>(a.b.data(), a.b.data() + a.b.size())}};
}

Affine affine_from_json(const nlohmann::json& j) {
  Affine a;
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
    throw ValidationError(kModule, "checkpoint layer has inconsistent sizes");
  a.W.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) a.W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
  a.b = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
  return a;
}

}  // namespace

std::string to_string(Arch arch) { return arch == Arch::Linear ? "linear" : "mlp"; }

Arch arch_from_string(const std::string& name) {
  if (name == "linear") return Arch::Linear;
  if (name == "mlp") return Arch::Mlp;
  throw ValidationError(kModule, "unknown architecture '" + name + "'");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Mae: return "mae";
    case LossKind::UMae: return "umae";
    case LossKind::Scl: return "scl";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "mae") return LossKind::Mae;
  if (name == "umae" || name == "u-mae") return LossKind::UMae;
  if (name == "scl") return LossKind::Scl;
  throw ValidationError(kModule, "unknown loss '" + name + "'");
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& layer : encoder)
    z.encoder.push_back({Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                         Eigen::VectorXd::Zero(layer.b.size())});
  z.decoder = {Eigen::MatrixXd::Zero(decoder.W.rows(), decoder.W.cols()),
               Eigen::VectorXd::Zero(decoder.b.size())};
  return z;
}

Eigen::Index ParamSet::size() const {
  Eigen::Index total = affine_size(decoder);
  for (const auto& layer : encoder) total += affine_size(layer);
  return total;
}

Eigen::VectorXd ParamSet::flatten() const {
  Eigen::VectorXd out(size());
  Eigen::Index at = 0;
  auto put = [&](const Affine& a) {
    out.segment(at, a.W.size()) = Eigen::Map<const Eigen::VectorXd>(a.W.data(), a.W.size());
    at += a.W.size();
    out.segment(at, a.b.size()) = a.b;
    at += a.b.size();
  };
  for (const auto& layer : encoder) put(layer);
  put(decoder);
  return out;
}

void ParamSet::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != size()) throw ValidationError(kModule, "flat parameter vector has wrong size");
  Eigen::Index at = 0;
  auto take = [&](Affine& a) {
    Eigen::Map<Eigen::VectorXd>(a.W.data(), a.W.size()) = flat.segment(at, a.W.size());
    at += a.W.size();
    a.b = flat.segment(at, a.b.size());
    at += a.b.size();
  };
  for (auto& layer : encoder) take(layer);
  take(decoder);
}

void ParamSet::axpy(double alpha, const ParamSet& other) {
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    encoder[l].W += alpha * other.encoder[l].W;
    encoder[l].b += alpha * other.encoder[l].b;
  }
  decoder.W += alpha * other.decoder.W;
  decoder.b += alpha * other.decoder.b;
}

void ParamSet::scale(double alpha) {
  for (auto& layer : encoder) {
    layer.W *= alpha;
    layer.b *= alpha;
  }
  decoder.W *= alpha;
  decoder.b *= alpha;
}

bool ParamSet::all_finite() const {
  for (const auto& layer : encoder)
    if (!layer.W.allFinite() || !layer.b.allFinite()) return false;
  return decoder.W.allFinite() && decoder.b.allFinite();
}

EncoderDecoder::EncoderDecoder(ModelConfig config, ParamSet params)
    : config_(config), params_(std::move(params)) {
  const std::size_t layers = config_.arch == Arch::Linear ? 1 : 2;
  if (params_.encoder.size() != layers) throw ValidationError(kModule, "encoder depth does not match architecture");
  if (params_.encoder.front().W.cols() != config_.input_dim() ||
      params_.encoder.back().W.rows() != config_.k || params_.decoder.W.cols() != config_.k ||
      params_.decoder.W.rows() != config_.output_dim())
    throw ValidationError(kModule, "parameter shapes do not match the model dimensions");
  if (!params_.all_finite()) throw ValidationError(kModule, "model parameters must be finite");
}

Eigen::VectorXd EncoderDecoder::embed(const View& v) const {
  const int s = config_.s;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(config_.input_dim());
  for (const auto& e : v.entries) {
    if (e.position < 0 || e.position >= config_.n)
      throw ValidationError(kModule, "view position " + std::to_string(e.position) + " outside [0, n)");
    if (e.content.size() != s)
      throw ValidationError(kModule, "patch dimension " + std::to_string(e.content.size()) +
                                         " does not match model s = " + std::to_string(s));
    const Eigen::Index base = static_cast<Eigen::Index>(e.position) * (s + 1);
    x.segment(base, s) = e.content;
    x[base + s] = 1.0;
  }
  return x;
}

Eigen::VectorXd EncoderDecoder::encode(const View& v) const { return forward_encoder(*this, v).f; }

Eigen::VectorXd EncoderDecoder::decode(const Eigen::VectorXd& z) const {
  return params_.decoder.W * z + params_.decoder.b;
}

Eigen::VectorXd EncoderDecoder::reconstruct(const View& input,
                                            const std::vector<int>& target_positions) const {
  return forward_decoder(*this, encode(input), target_positions).h;
}

Eigen::VectorXd EncoderDecoder::reconstruct(const View& kept, const Mask& mask) const {
  if (mask.n() != config_.n) throw ValidationError(kModule, "mask length does not match model n");
  if (kept.positions() != mask.kept_positions())
    throw ValidationError(kModule, "view is not the kept view of the mask");
  return reconstruct(kept, mask.dropped_positions());
}

EncoderDecoder init_model(const ModelConfig& config) {
  if (config.k < 1) throw ValidationError(kModule, "latent dimension k must be >= 1");
  if (config.n < 2 || config.s < 1) throw ValidationError(kModule, "model needs n >= 2 and s >= 1");
  if (config.arch == Arch::Mlp && config.hidden < 1) throw ValidationError(kModule, "mlp hidden width must be >= 1");
  Rng rng(config.seed);
  ParamSet p;
  if (config.arch == Arch::Linear) {
    p.encoder.push_back(glorot(config.k, config.input_dim(), rng));
  } else {
    p.encoder.push_back(glorot(config.hidden, config.input_dim(), rng));
    p.encoder.push_back(glorot(config.k, config.hidden, rng));
  }
  p.decoder = glorot(config.output_dim(), config.k, rng);
  return EncoderDecoder(config, std::move(p));
}

bool embedding_wider_than_data(const ModelConfig& config) { return config.k > config.n * config.s; }

LossResult loss_and_gradients(const EncoderDecoder& m, const Batch& batch, const LossSpec& spec) {
  if (spec.lambda < 0.0) throw ValidationError(kModule, "lambda must be >= 0");
  LossResult out;
  out.gradients = m.params().zeros_like();

  std::vector<EncoderCache> caches;
  std::vector<Eigen::VectorXd> df;

  if (spec.kind == LossKind::Mae || spec.kind == LossKind::UMae) {
    if (batch.recon.empty()) throw ValidationError(kModule, "reconstruction batch is empty");
    double total_weight = 0.0;
    for (const auto& sample : batch.recon) total_weight += sample.weight;
    if (!(total_weight > 0.0)) throw ValidationError(kModule, "batch weights must sum to a positive value");

    for (std::size_t b = 0; b < batch.recon.size(); ++b) {
      const auto& sample = batch.recon[b];
      caches.push_back(forward_encoder(m, sample.input));
      const Eigen::VectorXd& f = caches.back().f;
      const auto dec = forward_decoder(m, f, sample.target.positions());
      const Eigen::VectorXd target = normalized_target(sample.target);
      const Eigen::VectorXd diff = dec.h - target;
      const double l = diff.squaredNorm();
      if (!std::isfinite(l)) throw NumericalError(kModule, "non-finite loss at sample " + std::to_string(b));
      const double share = sample.weight / total_weight;
      out.recon_part += share * l;
      df.push_back(backward_decoder(m, f, dec, 2.0 * share * diff, out.gradients));
    }
  } else {
    if (batch.pairs.empty()) throw ValidationError(kModule, "pair batch is empty");
    const double inv_pairs = 1.0 / static_cast<double>(batch.pairs.size());
    for (const auto& pair : batch.pairs) {
      caches.push_back(forward_encoder(m, pair.a));
      caches.push_back(forward_encoder(m, pair.b));
    }
    df.assign(caches.size(), Eigen::VectorXd::Zero(m.config().k));
    for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
      const auto& fa = caches[2 * p].f;
      const auto& fb = caches[2 * p + 1].f;
      const double dot = fa.dot(fb);
      if (!std::isfinite(dot)) throw NumericalError(kModule, "non-finite loss at sample " + std::to_string(p));
      out.align_part -= inv_pairs * dot;
      df[2 * p] -= 2.0 * inv_pairs * fb;
      df[2 * p + 1] -= 2.0 * inv_pairs * fa;
    }
  }

  // Uniformity over every encoded feature in the batch, self pairs included.
  Eigen::MatrixXd F(static_cast<Eigen::Index>(caches.size()), m.config().k);
  for (std::size_t r = 0; r < caches.size(); ++r) F.row(static_cast<Eigen::Index>(r)) = caches[r].f.transpose();
  const double count = static_cast<double>(caches.size());
  const Eigen::MatrixXd gram = F * F.transpose();
  out.unif_part = gram.squaredNorm() / (count * count);

  double unif_weight = 0.0;
  switch (spec.kind) {
    case LossKind::Mae:
      out.loss = out.recon_part;
      break;
    case LossKind::UMae:
      out.loss = out.recon_part + spec.lambda * out.unif_part;
      unif_weight = spec.lambda;
      break;
    case LossKind::Scl:
      out.loss = 2.0 * out.align_part + out.unif_part;
      unif_weight = 1.0;
      break;
  }
  if (!std::isfinite(out.loss)) throw NumericalError(kModule, "non-finite batch loss");

  if (unif_weight != 0.0) {
    const Eigen::MatrixXd dF = (4.0 * unif_weight / (count * count)) * (gram * F);
    for (std::size_t r = 0; r < caches.size(); ++r) df[r] += dF.row(static_cast<Eigen::Index>(r)).transpose();
  }
  for (std::size_t r = 0; r < caches.size(); ++r) backward_encoder(m, caches[r], df[r], out.gradients);
  return out;
}

double check_gradients(const EncoderDecoder& m, const Batch& batch, const LossSpec& spec) {
  const Eigen::VectorXd analytic = loss_and_gradients(m, batch, spec).gradients.flatten();
  const Eigen::VectorXd theta = m.params().flatten();
  EncoderDecoder probe = m;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(theta[i]));
    Eigen::VectorXd shifted = theta;
    shifted[i] = theta[i] + h;
    probe.params().assign(shifted);
    const double up = loss_and_gradients(probe, batch, spec).loss;
    shifted[i] = theta[i] - h;
    probe.params().assign(shifted);
    const double down = loss_and_gradients(probe, batch, spec).loss;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / (1e-8 + std::abs(numeric)));
  }
  return worst;
}

nlohmann::json model_to_json(const EncoderDecoder& m) {
  const auto& c = m.config();
  nlohmann::json j;
  j["arch"] = to_string(c.arch);
  j["dims"] = {{"n", c.n}, {"s", c.s}, {"k", c.k}, {"hidden", c.hidden}};
  j["normalize_encoder"] = c.normalize_encoder;
  j["seed"] = c.seed;
  auto params = nlohmann::json::array();
  for (std::size_t l = 0; l < m.params().encoder.size(); ++l)
    params.push_back(affine_to_json("encoder." + std::to_string(l), m.params().encoder[l]));
  params.push_back(affine_to_json("decoder", m.params().decoder));
  j["params"] = std::move(params);
  return j;
}

EncoderDecoder model_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.arch = arch_from_string(j.at("arch").get<std::string>());
    const auto& dims = j.at("dims");
    c.n = dims.at("n").get<int>();
    c.s = dims.at("s").get<int>();
    c.k = dims.at("k").get<int>();
    c.hidden = dims.at("hidden").get<int>();
    c.normalize_encoder = j.at("normalize_encoder").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    ParamSet p;
    const auto& layers = j.at("params");
    if (layers.size() < 2) throw ValidationError(kModule, "checkpoint needs encoder and decoder layers");
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) p.encoder.push_back(affine_from_json(layers[l]));
    p.decoder = affine_from_json(layers.back());
    return EncoderDecoder(c, std::move(p));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed checkpoint: ") + e.what());
  }
}

PseudoEncoder PseudoEncoder::identity() { return PseudoEncoder{}; }

Eigen::VectorXd PseudoEncoder::apply(const View& x) const {
  if (mode_ == PseudoMode::Identity) return normalized_target(x);
  return model_->reconstruct(x, x.positions());
}

PseudoEncoder make_pseudo_encoder(const MaskGraph& g, PseudoMode mode, const PseudoTrainOptions& options) {
  PseudoEncoder pe;
  pe.mode_ = mode;
  if (mode == PseudoMode::Identity) return pe;
  if (g.n2_count() == 0) throw ValidationError(kModule, "pseudo-encoder needs masked views to fit");

  ModelConfig config;
  config.n = g.n;
  config.s = g.s;
  config.k = options.k;
  config.arch = options.arch;
  config.hidden = options.hidden;
  config.normalize_encoder = true;
  config.seed = options.seed;
  EncoderDecoder model = init_model(config);

  // Fit the raw decoder slice to the normalized target. The normalized output
  // has zero gradient on scalar slices, the raw one does not; near a fit the
  // two agree.
  std::vector<RawSample> samples;
  const double total = g.d2.sum();
  for (int j = 0; j < g.n2_count(); ++j) {
    const auto& v = g.x2_nodes[static_cast<std::size_t>(j)];
    samples.push_back({&v, normalized_target(v), g.d2[j] / total});
  }
  ParamSet velocity = model.params().zeros_like();
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    ParamSet grad = raw_fit_gradients(model, samples);
    velocity.scale(options.momentum);
    velocity.axpy(1.0, grad);
    model.params().axpy(-options.learning_rate, velocity);
    if (!model.params().all_finite()) throw NumericalError(kModule, "pseudo-encoder training diverged");
  }
  double eps = 0.0;
  for (const auto& sample : samples)
    eps += sample.weight * (model.reconstruct(*sample.view, sample.view->positions()) - sample.target).squaredNorm();
  pe.epsilon_ = eps;
  pe.model_ = std::move(model);
  return pe;
}

}  // namespace umae
