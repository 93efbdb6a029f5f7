#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "proxdiff/schedule.hpp"
#include "proxdiff/targets.hpp"

namespace proxdiff {

enum class NetKind : std::uint8_t { Prox = 0, Score = 1 };

// Shape of the network; two nets are parameter-compatible iff their
// descriptors compare equal.
struct ArchDescriptor {
  NetKind kind = NetKind::Prox;
  int dim = 1;
  int num_labels = 1;
  int width = 128;       // hidden layer width
  int depth = 3;         // number of hidden layers
  int embed_dim = 16;    // width of each conditioning embedding
  int fourier = 4;       // sinusoid pairs in the scalar encodings

  bool operator==(const ArchDescriptor&) const = default;
};

// Constants the net was trained under; stored in checkpoints so samplers can
// rebuild matching grids.
struct ModelMeta {
  NoiseSchedule schedule;
  double t_min = 1e-3;
  std::vector<int> step_grid;  // step counts whose (t, lambda) pairs were trained

  bool operator==(const ModelMeta&) const = default;
};

struct ParamBlock {
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

struct ParamLayout {
  ParamBlock label_table;            // embed_dim x (num_labels + 1); last column is the null token
  ParamBlock w_t, b_t;               // time embedding
  ParamBlock w_lambda, b_lambda;     // prox nets only (zero-sized for score nets)
  std::vector<ParamBlock> w_hidden;  // depth entries
  std::vector<ParamBlock> b_hidden;
  ParamBlock w_out, b_out;           // zero-initialized
  Eigen::Index total = 0;
};

// Activations captured by a cached forward pass; feed to Net::backward.
struct ForwardCache {
  Eigen::VectorXd psi_t, psi_lambda;      // sinusoid encodings
  Eigen::VectorXd phi;                    // trunk input
  std::vector<Eigen::VectorXd> h;         // tanh activations per hidden layer
  Eigen::VectorXd raw;                    // head output before the residual/score map
  int token_col = 0;
  double out_scale = 1.0;                 // d(out)/d(raw), elementwise
};

// Small conditional MLP in double precision. Residual parameterization for
// prox nets (out = x + head) and epsilon parameterization for score nets
// (out = -head / sqrt(1 - alpha_t)), both with a zero-initialized head so a
// fresh prox net is the identity and a fresh score net is zero. Deterministic:
// identical (params, inputs) give bit-identical outputs. Copying the object is
// a deep snapshot.
class Net {
 public:
  static Net make(const ArchDescriptor& arch, const ModelMeta& meta, std::uint64_t init_seed);
  static Net make_prox(ArchDescriptor arch, const ModelMeta& meta, std::uint64_t init_seed) {
    arch.kind = NetKind::Prox;
    return make(arch, meta, init_seed);
  }
  static Net make_score(ArchDescriptor arch, const ModelMeta& meta, std::uint64_t init_seed) {
    arch.kind = NetKind::Score;
    return make(arch, meta, init_seed);
  }

  const ArchDescriptor& arch() const { return arch_; }
  const ModelMeta& meta() const { return meta_; }
  const ParamLayout& layout() const { return layout_; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // f_theta(x; t, lambda, c), the learned proximal map. Prox nets only.
  Eigen::VectorXd prox_forward(const Eigen::VectorXd& x, double t, double lambda,
                               ConditionToken c) const;

  // s_theta(x; t, c), the learned score. Score nets only.
  Eigen::VectorXd score_forward(const Eigen::VectorXd& x, double t, ConditionToken c) const;

  // Forward pass that records activations for backprop. lambda is ignored by
  // score nets. Returns the same value as the plain forward.
  Eigen::VectorXd forward_cached(const Eigen::VectorXd& x, double t, double lambda,
                                 ConditionToken c, ForwardCache& cache) const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  // grad must have param_count() entries; it is added to, not overwritten.
  void backward(const ForwardCache& cache, const Eigen::VectorXd& d_out,
                Eigen::VectorXd& grad) const;

  // Same but with the loss gradient taken w.r.t. cache.raw (the epsilon head
  // of a score net, or the residual head of a prox net).
  void backward_from_raw(const ForwardCache& cache, const Eigen::VectorXd& d_raw,
                         Eigen::VectorXd& grad) const;

  // Deep copy; the snapshot is unaffected by later updates to this net.
  Net snapshot() const { return *this; }

  Eigen::Index param_count() const { return layout_.total; }

 private:
  Net() = default;

  int token_column(ConditionToken c) const;
  void validate_query(const Eigen::VectorXd& x, double t, double lambda) const;

  ArchDescriptor arch_;
  ModelMeta meta_;
  ParamLayout layout_;
  Eigen::VectorXd params_;
};

ParamLayout make_param_layout(const ArchDescriptor& arch);

}  // namespace proxdiff
