#include "probitmm/sampler.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>

namespace probitmm {

using Eigen::Index;

namespace {

constexpr double null_set_threshold = 1e-300;
constexpr double degenerate_quad_form = 1e-12;

void check_finite(const ChainState& s) {
    if (!s.eta.allFinite() || !s.tau.allFinite() || !s.v.allFinite())
        throw SamplerError("non-finite chain state at iteration " + std::to_string(s.iteration));
}

} // namespace

std::string to_string(Algorithm a) { return a == Algorithm::gibbs ? "gibbs" : "pxda"; }

Algorithm parse_algorithm(const std::string& name) {
    if (name == "gibbs") return Algorithm::gibbs;
    if (name == "pxda") return Algorithm::pxda;
    throw ValidationError("unknown algorithm '" + name + "' (expected gibbs or pxda)");
}

void validate(const SamplerConfig& config) {
    if (config.iterations < 1) throw ValidationError("sampler: iterations must be positive");
    if (config.burn_in < 0 || config.burn_in >= config.iterations)
        throw ValidationError("sampler: burn_in must lie in [0, iterations)");
    if (config.thin < 1) throw ValidationError("sampler: thin must be at least 1");
}

Eigen::VectorXd draw_tau(const ProbitMixedModel& model, const Eigen::VectorXd& eta, RandomStream& rng) {
    const auto& re = model.re();
    const auto& prior = model.prior();
    Eigen::VectorXd tau(model.r());
    for (Index j = 0; j < model.r(); ++j) {
        const double ss = eta.segment(model.p() + re.block_offsets[j], re.q[j]).squaredNorm();
        if (prior.b[j] == 0.0 && ss < null_set_threshold) {
            tau[j] = draw_gamma(1.0, 1.0, rng);
            continue;
        }
        const double shape = prior.a[j] + static_cast<double>(re.q[j]) / 2.0;
        tau[j] = draw_gamma(shape, prior.b[j] + ss / 2.0, rng);
    }
    return tau;
}

Eigen::VectorXd draw_v(const ProbitMixedModel& model, const Eigen::VectorXd& eta, RandomStream& rng) {
    const Eigen::VectorXd mean = model.W() * eta;
    Eigen::VectorXd v(model.n());
    for (Index i = 0; i < model.n(); ++i)
        v[i] = draw_truncated_normal(mean[i], 1.0, model.y()[i] == 1 ? TruncationSide::positive : TruncationSide::nonpositive,
                                     rng);
    return v;
}

Eigen::VectorXd draw_eta(const PosteriorPrecision<double>& pp, const DesignGram<double>& gram, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& z) {
    Eigen::LLT<Eigen::MatrixXd> llt(pp.sigma);
    if (llt.info() != Eigen::Success) throw LinalgError("draw_eta: Sigma is not positive definite");
    const auto L = llt.matrixL();
    const auto Lt = llt.matrixU();
    const Eigen::VectorXd mean = Lt.solve(L.solve(gram.Wt_times(v)));
    return mean + Lt.solve(z);
}

Eigen::VectorXd draw_eta(const PosteriorPrecision<double>& pp, const DesignGram<double>& gram, const Eigen::VectorXd& v,
                         RandomStream& rng) {
    Eigen::VectorXd z(pp.sigma.rows());
    for (Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
    return draw_eta(pp, gram, v, z);
}

Rescale rescale_latent(const PosteriorPrecision<double>& pp, const DesignGram<double>& gram, const Eigen::VectorXd& v,
                       RandomStream& rng) {
    Rescale out;
    out.quad_form = m1_quadratic_form(pp, gram, v);
    if (out.quad_form < degenerate_quad_form) {
        out.skipped = true;
        out.v = v;
        return out;
    }
    const double g2 = draw_gamma(static_cast<double>(v.size()) / 2.0, out.quad_form / 2.0, rng);
    out.g = std::sqrt(g2);
    out.v = out.g * v;
    return out;
}

ChainState draw_latent(const ProbitMixedModel& model, const ChainState& state, RandomStream& rng) {
    ChainState next = state;
    next.tau = draw_tau(model, state.eta, rng);
    next.v = draw_v(model, state.eta, rng);
    return next;
}

ChainState gibbs_step(const ProbitMixedModel& model, const DesignGram<double>& gram, const ChainState& state,
                      RandomStream& rng) {
    ChainState next = draw_latent(model, state, rng);
    const auto pp = build_precision(gram, next.tau);
    next.eta = draw_eta(pp, gram, next.v, rng);
    ++next.iteration;
    check_finite(next);
    return next;
}

ChainState gibbs_step(const ProbitMixedModel& model, const ChainState& state, RandomStream& rng) {
    return gibbs_step(model, make_gram(model), state, rng);
}

ChainState pxda_step(const ProbitMixedModel& model, const DesignGram<double>& gram, const ChainState& state,
                     RandomStream& rng, bool* skipped) {
    ChainState next = draw_latent(model, state, rng);
    const auto pp = build_precision(gram, next.tau);
    auto moved = rescale_latent(pp, gram, next.v, rng);
    if (skipped) *skipped = moved.skipped;
    next.v = std::move(moved.v);
    next.eta = draw_eta(pp, gram, next.v, rng);
    ++next.iteration;
    check_finite(next);
    return next;
}

ChainState pxda_step(const ProbitMixedModel& model, const ChainState& state, RandomStream& rng) {
    return pxda_step(model, make_gram(model), state, rng);
}

ChainState initial_state(const ProbitMixedModel& model, const SamplerConfig& config, RandomStream& rng) {
    ChainState state;
    state.eta = Eigen::VectorXd::Zero(model.p() + model.q());
    if (config.init_eta) {
        if (config.init_eta->size() != state.eta.size()) throw ValidationError("sampler: init_eta has the wrong length");
        state.eta = *config.init_eta;
    }
    return draw_latent(model, state, rng);
}

std::vector<std::string> draw_labels(const ProbitMixedModel& model) {
    auto labels = model.eta_labels();
    for (Index j = 0; j < model.r(); ++j) labels.push_back("tau_" + std::to_string(j + 1));
    return labels;
}

ChainOutput run_chain(const ProbitMixedModel& model, const SamplerConfig& config) {
    validate(config);
    if (!config.force) {
        const auto report = check_geometric_ergodicity(model, config.ergodicity_path, config.grid_size);
        if (report.overall != ErgodicityOverall::geometric)
            throw RefusedRun("geometric ergodicity not established for this model; rerun with force to sample anyway");
    }

    const auto start = std::chrono::steady_clock::now();
    const auto gram = make_gram(model);
    RandomStream rng(config.seed, config.stream);

    ChainOutput out;
    out.config = config;
    out.column_labels = draw_labels(model);
    const Index retained = (config.iterations - config.burn_in) / config.thin;
    const Index p_q = model.p() + model.q();
    out.draws.resize(retained, p_q + model.r());

    ChainState state = initial_state(model, config, rng);
    Index row = 0;
    for (Index m = 1; m <= config.iterations; ++m) {
        if (config.algorithm == Algorithm::gibbs) {
            state = gibbs_step(model, gram, state, rng);
        } else {
            bool skipped = false;
            state = pxda_step(model, gram, state, rng, &skipped);
            if (skipped) ++out.rescale_skips;
        }
        if (m > config.burn_in && (m - config.burn_in) % config.thin == 0 && row < retained) {
            out.draws.row(row).head(p_q) = state.eta.transpose();
            out.draws.row(row).tail(model.r()) = state.tau.transpose();
            ++row;
        }
    }
    out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

void write_draws_csv(std::ostream& os, const ChainOutput& out) {
    for (std::size_t k = 0; k < out.column_labels.size(); ++k) os << (k ? "," : "") << out.column_labels[k];
    os << '\n';
    char buf[64];
    for (Index i = 0; i < out.draws.rows(); ++i) {
        for (Index k = 0; k < out.draws.cols(); ++k) {
            const auto res = std::to_chars(buf, buf + sizeof buf, out.draws(i, k));
            if (k) os << ',';
            os.write(buf, res.ptr - buf);
        }
        os << '\n';
    }
}

} // namespace probitmm
