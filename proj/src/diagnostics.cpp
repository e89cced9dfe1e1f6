#include "probitmm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

namespace probitmm {

using Eigen::Index;

namespace {

double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& x) {
    const double mean = x.mean();
    return (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
}

void require_length(const Eigen::Ref<const Eigen::VectorXd>& series, const char* what) {
    if (series.size() < min_series_length)
        throw std::invalid_argument(std::string(what) + ": series needs at least " + std::to_string(min_series_length) +
                                    " values");
}

} // namespace

BatchMeans batch_means(const Eigen::Ref<const Eigen::VectorXd>& series) {
    require_length(series, "batch_means");
    const Index m = series.size();
    BatchMeans out;
    out.batch_size = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(m))));
    out.batches = m / out.batch_size;
    const Index start = m - out.batches * out.batch_size;

    Eigen::VectorXd means(out.batches);
    for (Index k = 0; k < out.batches; ++k) means[k] = series.segment(start + k * out.batch_size, out.batch_size).mean();
    const double grand = means.mean();
    out.sigma2_hat = static_cast<double>(out.batch_size) / static_cast<double>(out.batches - 1) *
                     (means.array() - grand).square().sum();
    out.mcse = std::sqrt(out.sigma2_hat / static_cast<double>(m));
    return out;
}

EssResult ess(const Eigen::Ref<const Eigen::VectorXd>& series) {
    require_length(series, "ess");
    const double m = static_cast<double>(series.size());
    EssResult out;
    const double var = sample_variance(series);
    const double sigma2 = batch_means(series).sigma2_hat;
    if (var == 0.0 || sigma2 == 0.0) {
        out.ess = m;
        out.constant = true;
        return out;
    }
    out.ess = std::clamp(m * var / sigma2, 1.0, m);
    return out;
}

Eigen::VectorXd autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& series, Index max_lag) {
    const Index m = series.size();
    max_lag = std::min(max_lag, m - 1);
    Eigen::VectorXd acf = Eigen::VectorXd::Zero(max_lag + 1);
    const Eigen::VectorXd centered = series.array() - series.mean();
    const double c0 = centered.squaredNorm();
    if (c0 == 0.0) return acf;
    for (Index lag = 0; lag <= max_lag; ++lag)
        acf[lag] = centered.head(m - lag).dot(centered.tail(m - lag)) / c0;
    return acf;
}

double lag1_autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& series) {
    if (series.size() < 2) return 0.0;
    return autocorrelation(series, 1)[1];
}

const ParameterSummary& SummaryReport::at(const std::string& label) const {
    for (const auto& p : parameters)
        if (p.label == label) return p;
    throw std::out_of_range("summary has no parameter '" + label + "'");
}

SummaryReport summarize(const Eigen::MatrixXd& draws, const std::vector<std::string>& labels) {
    if (draws.rows() < min_series_length)
        throw std::invalid_argument("summarize: need at least " + std::to_string(min_series_length) + " retained draws");
    if (static_cast<Index>(labels.size()) != draws.cols()) throw std::invalid_argument("summarize: label count mismatch");
    SummaryReport report;
    report.retained = draws.rows();
    for (Index k = 0; k < draws.cols(); ++k) {
        const auto col = draws.col(k);
        ParameterSummary s;
        s.label = labels[static_cast<std::size_t>(k)];
        s.mean = col.mean();
        s.sd = std::sqrt(sample_variance(col));
        s.mcse = batch_means(col).mcse;
        const auto e = ess(col);
        s.ess = e.ess;
        s.constant = e.constant;
        s.lag1 = lag1_autocorrelation(col);
        report.parameters.push_back(std::move(s));
    }
    return report;
}

SummaryReport summarize(const ChainOutput& out) {
    auto report = summarize(out.draws, out.column_labels);
    report.algorithm = to_string(out.config.algorithm);
    report.seed = out.config.seed;
    return report;
}

ComparisonReport compare_algorithms(const ProbitMixedModel& model, const SamplerConfig& config) {
    SamplerConfig gibbs_config = config;
    gibbs_config.algorithm = Algorithm::gibbs;
    SamplerConfig pxda_config = config;
    pxda_config.algorithm = Algorithm::pxda;

    auto pxda_future = std::async(std::launch::async, [&] { return run_chain(model, pxda_config); });
    const ChainOutput gibbs = run_chain(model, gibbs_config);
    const ChainOutput pxda = pxda_future.get();

    ComparisonReport report;
    report.gibbs = summarize(gibbs);
    report.pxda = summarize(pxda);
    report.seed_gibbs = gibbs.config.seed;
    report.seed_pxda = pxda.config.seed;
    report.seconds_gibbs = gibbs.elapsed_seconds;
    report.seconds_pxda = pxda.elapsed_seconds;
    report.iterations = config.iterations;
    report.expectation_met = true;
    for (std::size_t k = 0; k < report.gibbs.parameters.size(); ++k) {
        const auto& g = report.gibbs.parameters[k];
        const auto& x = report.pxda.parameters[k];
        AlgorithmComparison c;
        c.label = g.label;
        c.ess_gibbs = g.ess;
        c.ess_pxda = x.ess;
        c.lag1_gibbs = g.lag1;
        c.lag1_pxda = x.lag1;
        c.ess_per_second_gibbs = g.ess / std::max(report.seconds_gibbs, 1e-9);
        c.ess_per_second_pxda = x.ess / std::max(report.seconds_pxda, 1e-9);
        c.pxda_no_worse = c.lag1_pxda <= c.lag1_gibbs + comparison_slack;
        report.expectation_met = report.expectation_met && c.pxda_no_worse;
        report.parameters.push_back(std::move(c));
    }
    return report;
}

} // namespace probitmm
