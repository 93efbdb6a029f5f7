#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "proxdiff/net.hpp"
#include "proxdiff/schedule.hpp"
#include "proxdiff/targets.hpp"

namespace proxdiff {

enum class StepRuleTag { SdeEuler, OdeEuler, Pda, PdaHybrid };

// A reverse-time update rule plus its guidance weight. omega = 0 is plain
// conditional sampling; score rules ignore the prox map and vice versa.
struct StepRule {
  StepRuleTag tag = StepRuleTag::PdaHybrid;
  double omega = 0.0;

  bool is_prox() const { return tag == StepRuleTag::Pda || tag == StepRuleTag::PdaHybrid; }
};

// PDA requires gamma_k < 2; violations raise this.
struct StepSizeError : std::domain_error {
  using std::domain_error::domain_error;
};

using ScoreFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, double t, ConditionToken)>;
using ProxFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double t,
                                             double lambda, ConditionToken)>;

// Classifier-free combinations: (1 + omega) * conditional - omega * null.
// omega = 0 evaluates only the conditional branch.
Eigen::VectorXd score_cfg(const ScoreFn& score, const Eigen::VectorXd& x, double t,
                          ConditionToken c, double omega);
Eigen::VectorXd prox_cfg(const ProxFn& prox, const Eigen::VectorXd& x, double t,
                         double lambda, ConditionToken c, double omega);

// One reverse step from index k to k-1 (k in [1, grid.steps]).
//
//   sde_euler : X_{k-1} = X_k + gamma_k (X_k / 2 + s(X_k, t_k)) + sqrt(gamma_k) xi
//   ode_euler : X_{k-1} = X_k + gamma_k (X_k / 2 + s(X_k, t_k) / 2)
//   pda       : X_{k-1} = prox_{t_{k-1}, 2 gamma_k/(2-gamma_k)}( 2/(2-gamma_k) (X_k + sqrt(gamma_k) xi) )
//   pda_hybrid: X_{k-1} = prox_{t_{k-1}, gamma_k}( (1 + gamma_k/2) X_k + sqrt(gamma_k) xi )
//
// Non-finite results raise std::runtime_error naming the step index.
Eigen::VectorXd sde_euler_step(const Eigen::VectorXd& x, int k, const TimeGrid& grid,
                               const ScoreFn& score, ConditionToken c, double omega,
                               const Eigen::VectorXd& xi);
Eigen::VectorXd ode_euler_step(const Eigen::VectorXd& x, int k, const TimeGrid& grid,
                               const ScoreFn& score, ConditionToken c, double omega);
Eigen::VectorXd pda_step(const Eigen::VectorXd& x, int k, const TimeGrid& grid,
                         const ProxFn& prox, ConditionToken c, double omega,
                         const Eigen::VectorXd& xi);
Eigen::VectorXd pda_hybrid_step(const Eigen::VectorXd& x, int k, const TimeGrid& grid,
                                const ProxFn& prox, ConditionToken c, double omega,
                                const Eigen::VectorXd& xi);

// Everything one reverse chain produced. For PDA-hybrid the recorded states
// are the noise-lifted chain Y_K, ..., Y_0 defined by
//   Y_K = (1 + gamma_K/2) X_K + sqrt(gamma_K) xi_K,  X_K ~ N(0, I)
//   Y_{k-1} = (1 + gamma_{k-1}/2) f_omega(Y_k) + sqrt(gamma_{k-1}) xi_{k-1},  k = K..2
//   Y_0 = f_omega(Y_1)
// where f_omega at source index k applies the guided prox with time t_{k-1}
// and lambda = gamma_k. Y_0 equals the X-chain sample exactly. For the other
// rules the states are the X-chain itself. Noises are indexed so that
// noise(k) is the draw attached to index k (empty for the ODE rule).
struct ChainRecord {
  StepRule rule;
  ConditionToken token = ConditionToken::null();
  TimeGrid grid;
  Eigen::VectorXd x_init;                 // the X_K draw
  std::vector<Eigen::VectorXd> states;    // states[i] = state at index K - i
  std::vector<Eigen::VectorXd> noises;    // noises[i] = xi_{K - i}

  const Eigen::VectorXd& state(int k) const {
    return states.at(static_cast<std::size_t>(grid.steps - k));
  }
  const Eigen::VectorXd& noise(int k) const {
    return noises.at(static_cast<std::size_t>(grid.steps - k));
  }
  const Eigen::VectorXd& final_sample() const { return states.back(); }
};

// Score map and prox map a chain may draw on; only the member matching the
// step rule is touched.
struct SamplerFns {
  ScoreFn score;
  ProxFn prox;
};

SamplerFns oracle_fns(const MixtureTarget& target);       // closed-form/brute-force oracle
SamplerFns net_fns(const Net& net);                       // learned map (kind decides which)

// Runs one chain. Draws are a pure function of (seed, chain_index, step), so
// chains are reproducible and may run concurrently.
ChainRecord run_chain(const StepRule& rule, const TimeGrid& grid, int dim,
                      const SamplerFns& fns, ConditionToken token, std::uint64_t seed,
                      std::uint64_t chain_index = 0);

// Convenience sweep: n chains, labels assigned round-robin from `labels`
// (pass {null} for unconditional). Returns the final samples.
std::vector<Eigen::VectorXd> sample_batch(const StepRule& rule, const TimeGrid& grid,
                                          int dim, const SamplerFns& fns,
                                          const std::vector<ConditionToken>& labels,
                                          int n, std::uint64_t seed);

// Closed-form law of X_0 for the PDA-hybrid chain with the exact Gaussian
// prox on a single-component target slice N(mu, sigma2 I): every step map is
// affine in (state, noise), so the chain stays Gaussian coordinatewise and a
// scalar recursion tracks mean and variance from X_K ~ N(0, 1) down to X_0.
struct GaussianChainMoments {
  double mean = 0.0;
  double var = 1.0;
};
GaussianChainMoments pda_hybrid_gaussian_moments(const NoiseSchedule& s, const TimeGrid& grid,
                                                 double mu, double sigma2);

}  // namespace proxdiff
