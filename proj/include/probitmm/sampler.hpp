#pragma once

#include "probitmm/conditions.hpp"
#include "probitmm/linalg.hpp"
#include "probitmm/model.hpp"
#include "probitmm/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace probitmm {

enum class Algorithm { gibbs, pxda };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

/// Current (eta, v, tau). eta stacks beta then u. After any latent update v_i > 0 exactly
/// when y_i = 1.
struct ChainState {
    Eigen::VectorXd eta;
    Eigen::VectorXd v;
    Eigen::VectorXd tau;
    std::uint64_t iteration = 0;
};

struct SamplerConfig {
    Algorithm algorithm = Algorithm::gibbs;
    Eigen::Index iterations = 1000;
    Eigen::Index burn_in = 0;
    Eigen::Index thin = 1;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::optional<Eigen::VectorXd> init_eta; // zero vector when absent
    bool force = false;                      // run even when ergodicity is not established
    ErgodicityPath ergodicity_path = ErgodicityPath::automatic;
    Eigen::Index grid_size = default_grid_size;
};

void validate(const SamplerConfig& config);

/// Retained draws: one row per kept iteration holding (eta, tau).
struct ChainOutput {
    Eigen::MatrixXd draws;
    std::vector<std::string> column_labels;
    SamplerConfig config;
    double elapsed_seconds = 0.0;
    Eigen::Index rescale_skips = 0; // PX-DA steps where v^T M1 v was numerically zero

    Eigen::Index retained() const { return draws.rows(); }
};

/// The model's conditions were not established and the run was not forced.
class RefusedRun : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite chain state; the message carries the iteration index.
class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// tau_j ~ Gamma(a_j + q_j/2, b_j + u_j^T u_j / 2). When b_j = 0 and u_j is numerically zero
/// the rate vanishes; tau_j is then drawn from Gamma(1, 1).
Eigen::VectorXd draw_tau(const ProbitMixedModel& model, const Eigen::VectorXd& eta, RandomStream& rng);

/// v_i ~ TN(w_i^T eta, 1, y_i).
Eigen::VectorXd draw_v(const ProbitMixedModel& model, const Eigen::VectorXd& eta, RandomStream& rng);

/// eta ~ N(Sigma^{-1} W^T v, Sigma^{-1}) from Sigma = L L^T: the mean by two triangular solves
/// and the noise as L^{-T} z.
Eigen::VectorXd draw_eta(const PosteriorPrecision<double>& pp, const DesignGram<double>& gram, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& z);
Eigen::VectorXd draw_eta(const PosteriorPrecision<double>& pp, const DesignGram<double>& gram, const Eigen::VectorXd& v,
                         RandomStream& rng);

struct Rescale {
    Eigen::VectorXd v;
    double g = 1.0;
    double quad_form = 0.0; // v^T M1 v before rescaling
    bool skipped = false;
};

/// Group move v -> g v with g^2 ~ Gamma(n/2, v^T M1 v / 2). Skipped (g = 1) when
/// v^T M1 v < 1e-12.
Rescale rescale_latent(const PosteriorPrecision<double>& pp, const DesignGram<double>& gram, const Eigen::VectorXd& v,
                       RandomStream& rng);

/// Step 1 shared by both algorithms: tau then v, both from the current eta.
ChainState draw_latent(const ProbitMixedModel& model, const ChainState& state, RandomStream& rng);

ChainState gibbs_step(const ProbitMixedModel& model, const DesignGram<double>& gram, const ChainState& state,
                      RandomStream& rng);
ChainState gibbs_step(const ProbitMixedModel& model, const ChainState& state, RandomStream& rng);

ChainState pxda_step(const ProbitMixedModel& model, const DesignGram<double>& gram, const ChainState& state,
                     RandomStream& rng, bool* skipped = nullptr);
ChainState pxda_step(const ProbitMixedModel& model, const ChainState& state, RandomStream& rng);

/// eta from config (zero by default), then one latent draw so v and tau are populated.
ChainState initial_state(const ProbitMixedModel& model, const SamplerConfig& config, RandomStream& rng);

/// Runs the configured algorithm. Unless config.force is set, refuses (RefusedRun) when
/// geometric ergodicity is not established for the model.
ChainOutput run_chain(const ProbitMixedModel& model, const SamplerConfig& config);

/// beta_*, u_*, tau_1..tau_r.
std::vector<std::string> draw_labels(const ProbitMixedModel& model);

/// Header row of labels, then one comma-separated row per draw in shortest round-trip form.
void write_draws_csv(std::ostream& os, const ChainOutput& out);

} // namespace probitmm
