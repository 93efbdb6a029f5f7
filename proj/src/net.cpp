#include "proxdiff/net.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "proxdiff/rng.hpp"

namespace proxdiff {

namespace {

Eigen::Map<const Eigen::MatrixXd> mat(const Eigen::VectorXd& v, const ParamBlock& b) {
  return {v.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<Eigen::MatrixXd> mat(Eigen::VectorXd& v, const ParamBlock& b) {
  return {v.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const Eigen::VectorXd> vec(const Eigen::VectorXd& v, const ParamBlock& b) {
  return {v.data() + b.offset, b.size()};
}

Eigen::Map<Eigen::VectorXd> vec(Eigen::VectorXd& v, const ParamBlock& b) {
  return {v.data() + b.offset, b.size()};
}

// [u, sin(pi 2^j u), cos(pi 2^j u)]_{j<F}: a fixed multiscale encoding the
// learned embedding layers act on.
Eigen::VectorXd sinusoid_features(double u, int fourier) {
  Eigen::VectorXd psi(1 + 2 * fourier);
  psi[0] = u;
  double freq = std::numbers::pi;
  for (int j = 0; j < fourier; ++j) {
    psi[1 + 2 * j] = std::sin(freq * u);
    psi[2 + 2 * j] = std::cos(freq * u);
    freq *= 2.0;
  }
  return psi;
}

void xavier_fill(Eigen::Map<Eigen::MatrixXd> w, CounterRng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      w(r, c) = a * (2.0 * rng.uniform01() - 1.0);
    }
  }
}

}  // namespace

ParamLayout make_param_layout(const ArchDescriptor& arch) {
  if (arch.dim < 1 || arch.num_labels < 1 || arch.width < 1 || arch.depth < 1 ||
      arch.embed_dim < 1 || arch.fourier < 0) {
    throw std::invalid_argument("ArchDescriptor: all sizes must be positive (fourier >= 0)");
  }
  const Eigen::Index e = arch.embed_dim;
  const Eigen::Index p = 1 + 2 * static_cast<Eigen::Index>(arch.fourier);
  const bool prox = arch.kind == NetKind::Prox;
  const Eigen::Index in = arch.dim + (prox ? 3 : 2) * e;

  ParamLayout lay;
  Eigen::Index off = 0;
  const auto block = [&off](Eigen::Index rows, Eigen::Index cols) {
    ParamBlock b{off, rows, cols};
    off += rows * cols;
    return b;
  };

  lay.label_table = block(e, arch.num_labels + 1);
  lay.w_t = block(e, p);
  lay.b_t = block(e, 1);
  if (prox) {
    lay.w_lambda = block(e, p);
    lay.b_lambda = block(e, 1);
  }
  Eigen::Index fan_in = in;
  for (int i = 0; i < arch.depth; ++i) {
    lay.w_hidden.push_back(block(arch.width, fan_in));
    lay.b_hidden.push_back(block(arch.width, 1));
    fan_in = arch.width;
  }
  lay.w_out = block(arch.dim, arch.width);
  lay.b_out = block(arch.dim, 1);
  lay.total = off;
  return lay;
}

Net Net::make(const ArchDescriptor& arch, const ModelMeta& meta, std::uint64_t init_seed) {
  if (!(meta.t_min >= 0.0 && meta.t_min < 1.0)) {
    throw std::invalid_argument("ModelMeta: t_min must lie in [0, 1)");
  }
  beta_at(meta.schedule, 0.0);  // validates the schedule constants

  Net net;
  net.arch_ = arch;
  net.meta_ = meta;
  net.layout_ = make_param_layout(arch);
  net.params_ = Eigen::VectorXd::Zero(net.layout_.total);

  CounterRng rng({init_seed, 0x6e657469ull});  // "neti"
  auto table = mat(net.params_, net.layout_.label_table);
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
      table(r, c) = 0.3 * (2.0 * rng.uniform01() - 1.0);
    }
  }
  xavier_fill(mat(net.params_, net.layout_.w_t), rng);
  if (arch.kind == NetKind::Prox) {
    xavier_fill(mat(net.params_, net.layout_.w_lambda), rng);
  }
  for (const ParamBlock& b : net.layout_.w_hidden) {
    xavier_fill(mat(net.params_, b), rng);
  }
  // w_out/b_out and every bias stay zero: a fresh prox net is the identity
  // map and a fresh score net is identically zero.
  return net;
}

int Net::token_column(ConditionToken c) const {
  if (c.is_null()) return arch_.num_labels;
  if (c.id() >= arch_.num_labels) {
    throw std::invalid_argument("Net: label " + std::to_string(c.id()) +
                                " out of range (net has " + std::to_string(arch_.num_labels) +
                                " labels)");
  }
  return c.id();
}

void Net::validate_query(const Eigen::VectorXd& x, double t, double lambda) const {
  if (x.size() != arch_.dim) {
    throw std::invalid_argument("Net: input has dimension " + std::to_string(x.size()) +
                                ", net expects " + std::to_string(arch_.dim));
  }
  if (!x.allFinite() || !std::isfinite(t)) {
    throw std::domain_error("Net: non-finite query");
  }
  constexpr double kSlack = 1e-12;
  if (t < meta_.t_min - kSlack || t > 1.0 + kSlack) {
    throw std::domain_error("Net: t=" + std::to_string(t) + " outside [t_min, 1] = [" +
                            std::to_string(meta_.t_min) + ", 1]");
  }
  if (arch_.kind == NetKind::Prox && (!std::isfinite(lambda) || lambda <= 0.0)) {
    throw std::domain_error("Net: lambda must be positive and finite, got " +
                            std::to_string(lambda));
  }
}

Eigen::VectorXd Net::forward_cached(const Eigen::VectorXd& x, double t, double lambda,
                                    ConditionToken c, ForwardCache& cache) const {
  validate_query(x, t, lambda);
  const bool prox = arch_.kind == NetKind::Prox;
  const Eigen::Index e = arch_.embed_dim;

  cache.token_col = token_column(c);
  cache.psi_t = sinusoid_features(t, arch_.fourier);
  cache.phi.resize(arch_.dim + (prox ? 3 : 2) * e);
  cache.phi.head(arch_.dim) = x;
  cache.phi.segment(arch_.dim, e) =
      mat(params_, layout_.w_t) * cache.psi_t + vec(params_, layout_.b_t);
  if (prox) {
    cache.psi_lambda = sinusoid_features(std::log(lambda), arch_.fourier);
    cache.phi.segment(arch_.dim + e, e) =
        mat(params_, layout_.w_lambda) * cache.psi_lambda + vec(params_, layout_.b_lambda);
  }
  cache.phi.tail(e) = mat(params_, layout_.label_table).col(cache.token_col);

  cache.h.resize(static_cast<std::size_t>(arch_.depth));
  const Eigen::VectorXd* input = &cache.phi;
  for (int i = 0; i < arch_.depth; ++i) {
    auto& h = cache.h[static_cast<std::size_t>(i)];
    h = (mat(params_, layout_.w_hidden[static_cast<std::size_t>(i)]) * (*input) +
         vec(params_, layout_.b_hidden[static_cast<std::size_t>(i)]))
            .array()
            .tanh()
            .matrix();
    input = &h;
  }
  cache.raw = mat(params_, layout_.w_out) * (*input) + vec(params_, layout_.b_out);

  if (prox) {
    cache.out_scale = 1.0;
    return x + cache.raw;
  }
  const double one_minus_alpha = 1.0 - alpha_at(meta_.schedule, t);
  cache.out_scale = -1.0 / std::sqrt(one_minus_alpha);
  return cache.out_scale * cache.raw;
}

Eigen::VectorXd Net::prox_forward(const Eigen::VectorXd& x, double t, double lambda,
                                  ConditionToken c) const {
  if (arch_.kind != NetKind::Prox) {
    throw std::logic_error("prox_forward called on a score net");
  }
  ForwardCache cache;
  return forward_cached(x, t, lambda, c, cache);
}

Eigen::VectorXd Net::score_forward(const Eigen::VectorXd& x, double t,
                                   ConditionToken c) const {
  if (arch_.kind != NetKind::Score) {
    throw std::logic_error("score_forward called on a prox net");
  }
  ForwardCache cache;
  return forward_cached(x, t, 0.0, c, cache);
}

void Net::backward(const ForwardCache& cache, const Eigen::VectorXd& d_out,
                   Eigen::VectorXd& grad) const {
  backward_from_raw(cache, cache.out_scale * d_out, grad);
}

void Net::backward_from_raw(const ForwardCache& cache, const Eigen::VectorXd& d_raw,
                            Eigen::VectorXd& grad) const {
  if (grad.size() != layout_.total) {
    throw std::invalid_argument("Net::backward: gradient buffer has wrong size");
  }
  if (d_raw.size() != arch_.dim) {
    throw std::invalid_argument("Net::backward: output gradient has wrong dimension");
  }
  const Eigen::Index e = arch_.embed_dim;
  const bool prox = arch_.kind == NetKind::Prox;
  const auto last = static_cast<std::size_t>(arch_.depth - 1);

  mat(grad, layout_.w_out).noalias() += d_raw * cache.h[last].transpose();
  vec(grad, layout_.b_out) += d_raw;
  Eigen::VectorXd gh = mat(params_, layout_.w_out).transpose() * d_raw;

  for (int i = arch_.depth - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    const Eigen::VectorXd gpre =
        (gh.array() * (1.0 - cache.h[ui].array().square())).matrix();
    const Eigen::VectorXd& input = (i == 0) ? cache.phi : cache.h[ui - 1];
    mat(grad, layout_.w_hidden[ui]).noalias() += gpre * input.transpose();
    vec(grad, layout_.b_hidden[ui]) += gpre;
    gh = mat(params_, layout_.w_hidden[ui]).transpose() * gpre;
  }

  // gh is now the gradient w.r.t. phi; route the embedding slices. The x
  // slice is dropped: inputs are data, not parameters.
  const Eigen::VectorXd g_t = gh.segment(arch_.dim, e);
  mat(grad, layout_.w_t).noalias() += g_t * cache.psi_t.transpose();
  vec(grad, layout_.b_t) += g_t;
  if (prox) {
    const Eigen::VectorXd g_l = gh.segment(arch_.dim + e, e);
    mat(grad, layout_.w_lambda).noalias() += g_l * cache.psi_lambda.transpose();
    vec(grad, layout_.b_lambda) += g_l;
  }
  mat(grad, layout_.label_table).col(cache.token_col) += gh.tail(e);
}

}  // namespace proxdiff
