#include "probitmm/model.hpp"

#include "probitmm/random.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

namespace probitmm {

using Eigen::Index;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

RandomEffectsStructure RandomEffectsStructure::from_levels(const std::vector<std::vector<int>>& levels,
                                                           const std::vector<int>& num_levels) {
    if (levels.size() != num_levels.size())
        throw ValidationError("from_levels: one level count is required per factor");
    RandomEffectsStructure re;
    const Index n = levels.empty() ? 0 : static_cast<Index>(levels.front().size());
    Index offset = 0;
    for (std::size_t j = 0; j < levels.size(); ++j) {
        if (num_levels[j] < 1) throw ValidationError("from_levels: every factor needs at least one level");
        if (static_cast<Index>(levels[j].size()) != n)
            throw ValidationError("from_levels: factors have different lengths");
        re.q.push_back(num_levels[j]);
        re.block_offsets.push_back(offset);
        offset += num_levels[j];
    }
    re.Z = Eigen::MatrixXd::Zero(n, offset);
    for (std::size_t j = 0; j < levels.size(); ++j) {
        for (Index i = 0; i < n; ++i) {
            const int level = levels[j][static_cast<std::size_t>(i)];
            if (level < 0 || level >= num_levels[j]) throw ValidationError("from_levels: level index out of range");
            re.Z(i, re.block_offsets[j] + level) = 1.0;
        }
    }
    return re;
}

void validate(const ObservationSet& obs) {
    if (obs.X.rows() < 1 || obs.X.cols() < 1) throw ValidationError("observations: need n >= 1 and p >= 1");
    if (obs.y.size() != obs.X.rows()) throw ValidationError("observations: y and X row counts differ");
    for (Index i = 0; i < obs.y.size(); ++i)
        if (obs.y[i] != 0 && obs.y[i] != 1) throw ValidationError("observations: responses must be 0 or 1");
    if (!obs.X.allFinite()) throw ValidationError("observations: X has non-finite entries");
    for (Index k = 0; k < obs.X.cols(); ++k)
        if ((obs.X.col(k).array() == 0.0).all()) throw ValidationError("observations: X has an all-zero column");
}

void validate(const RandomEffectsStructure& re) {
    if (re.block_offsets.size() != re.q.size()) throw ValidationError("random effects: offsets and block sizes disagree");
    Index offset = 0;
    for (std::size_t j = 0; j < re.q.size(); ++j) {
        if (re.q[j] < 1) throw ValidationError("random effects: every block needs q_j >= 1");
        if (re.block_offsets[j] != offset) throw ValidationError("random effects: offsets do not partition the columns");
        offset += re.q[j];
    }
    if (offset != re.Z.cols()) throw ValidationError("random effects: block sizes do not sum to the column count of Z");
    for (std::size_t j = 0; j < re.q.size(); ++j) {
        const auto block = re.Z.middleCols(re.block_offsets[j], re.q[j]);
        const bool indicator = (block.array() == 0.0 || block.array() == 1.0).all();
        if (!indicator || !(block.rowwise().sum().array() == 1.0).all())
            throw ValidationError("random effects: each row of Z_" + std::to_string(j + 1) + " must hold exactly one 1");
    }
}

void validate(const PriorSpec& prior, Index r) {
    if (prior.a.size() != r || prior.b.size() != r)
        throw ValidationError("prior: need one (a, b) pair per random-effect block");
    if (!prior.a.allFinite() || !prior.b.allFinite()) throw ValidationError("prior: hyperparameters must be finite");
    if ((prior.b.array() < 0.0).any()) throw ValidationError("prior: b_j must be nonnegative");
}

ProbitMixedModel make_model(ObservationSet obs, RandomEffectsStructure re, PriorSpec prior) {
    validate(obs);
    if (re.Z.size() == 0 && re.q.empty()) re.Z.resize(obs.n(), 0);
    validate(re);
    validate(prior, re.r());
    if (re.Z.rows() != obs.n()) throw ValidationError("model: X and Z row counts differ");

    ProbitMixedModel model;
    model.W_.resize(obs.n(), obs.p() + re.total_q());
    model.W_ << obs.X, re.Z;
    model.obs_ = std::move(obs);
    model.re_ = std::move(re);
    model.prior_ = std::move(prior);
    return model;
}

bool ProbitMixedModel::has_intercept() const { return (X().col(0).array() == 1.0).all(); }

std::vector<std::string> ProbitMixedModel::eta_labels() const {
    std::vector<std::string> labels;
    for (Index k = 0; k < p(); ++k) labels.push_back("beta_" + std::to_string(k));
    for (Index j = 0; j < r(); ++j)
        for (Index k = 0; k < re_.q[j]; ++k) labels.push_back("u_" + std::to_string(j + 1) + "_" + std::to_string(k + 1));
    return labels;
}

Eigen::VectorXd response_signs(const Eigen::VectorXi& y) {
    return y.unaryExpr([](int yi) { return yi == 1 ? -1.0 : 1.0; });
}

SignedDesign signed_design(const ProbitMixedModel& model) {
    SignedDesign out;
    out.c = response_signs(model.y());
    out.Wstar = out.c.asDiagonal() * model.W();
    return out;
}

Eigen::VectorXd TransformedDesign::transform(const Eigen::VectorXd& eta) const {
    Index qsum = 0;
    for (auto qj : q) qsum += qj;
    if (eta.size() != p + qsum) throw ValidationError("transform: eta has the wrong length");

    Eigen::VectorXd out(Wtilde.cols());
    out.head(p) = eta.head(p);
    Index src = p;
    Index dst = p;
    for (auto qj : q) {
        const double first = eta[src];
        out[0] += first;
        for (Index k = 1; k < qj; ++k) out[dst++] = eta[src + k] - first;
        src += qj;
    }
    return out;
}

TransformedDesign transform_design(const ProbitMixedModel& model) {
    if (!model.has_intercept()) throw ValidationError("transform_design: first column of X must be all ones");

    const auto& re = model.re();
    TransformedDesign td;
    td.p = model.p();
    td.q = re.q;

    Index cols = model.p();
    for (auto qj : re.q) cols += qj - 1;
    td.Wtilde.resize(model.n(), cols);
    td.Wtilde.leftCols(model.p()) = model.X();

    td.param_names.push_back("mu_0");
    for (Index k = 1; k < model.p(); ++k) td.param_names.push_back("beta_" + std::to_string(k));

    Index dst = model.p();
    for (Index j = 0; j < re.r(); ++j) {
        const Index width = re.q[j] - 1;
        td.Wtilde.middleCols(dst, width) = re.Z.middleCols(re.block_offsets[j] + 1, width);
        for (Index k = 1; k <= width; ++k) td.param_names.push_back("d_" + std::to_string(j + 1) + "_" + std::to_string(k));
        dst += width;
    }
    td.Wtilde_star = response_signs(model.y()).asDiagonal() * td.Wtilde;
    return td;
}

Index Table::column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == name) return static_cast<Index>(k);
    throw ValidationError("unknown column '" + name + "'");
}

ProbitMixedModel build_design(const Table& table, const ColumnRoles& roles, const PriorSpec& prior) {
    if (table.rows.empty()) throw ValidationError("build_design: table has no rows");
    if (roles.factors.empty()) throw ValidationError("build_design: at least one factor column is required");
    const Index n = static_cast<Index>(table.rows.size());
    for (const auto& row : table.rows)
        if (row.size() != table.header.size()) throw ValidationError("build_design: ragged table row");

    ObservationSet obs;
    obs.y.resize(n);
    const Index ycol = table.column(roles.response);
    for (Index i = 0; i < n; ++i) {
        const auto& cell = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(ycol)];
        if (cell == "0") obs.y[i] = 0;
        else if (cell == "1") obs.y[i] = 1;
        else throw ValidationError("build_design: response '" + roles.response + "' has non-binary value '" + cell + "'");
    }

    obs.X.resize(n, 1 + static_cast<Index>(roles.fixed.size()));
    obs.X.col(0).setOnes();
    obs.x_names.push_back("(intercept)");
    for (std::size_t k = 0; k < roles.fixed.size(); ++k) {
        const Index col = table.column(roles.fixed[k]);
        for (Index i = 0; i < n; ++i) {
            const auto& cell = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)];
            std::size_t used = 0;
            double value = 0.0;
            try {
                value = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cell.size())
                throw ValidationError("build_design: column '" + roles.fixed[k] + "' has non-numeric value '" + cell + "'");
            obs.X(i, static_cast<Index>(k) + 1) = value;
        }
        obs.x_names.push_back(roles.fixed[k]);
    }

    std::vector<std::vector<int>> levels(roles.factors.size(), std::vector<int>(static_cast<std::size_t>(n)));
    std::vector<int> num_levels;
    std::vector<std::vector<std::string>> level_names(roles.factors.size());
    for (std::size_t j = 0; j < roles.factors.size(); ++j) {
        const Index col = table.column(roles.factors[j]);
        std::unordered_map<std::string, int> index;
        for (Index i = 0; i < n; ++i) {
            const auto& cell = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)];
            auto [it, inserted] = index.try_emplace(cell, static_cast<int>(index.size()));
            if (inserted) level_names[j].push_back(cell);
            levels[j][static_cast<std::size_t>(i)] = it->second;
        }
        num_levels.push_back(static_cast<int>(index.size()));
    }

    validate(prior, static_cast<Index>(roles.factors.size()));
    for (std::size_t j = 0; j < roles.factors.size(); ++j)
        if (num_levels[j] == 1 && prior.b[static_cast<Index>(j)] == 0.0)
            throw ValidationError("build_design: factor '" + roles.factors[j] +
                                  "' has a single level with b = 0; the posterior is improper");

    auto re = RandomEffectsStructure::from_levels(levels, num_levels);
    re.factor_names = roles.factors;
    re.level_names = std::move(level_names);
    return make_model(std::move(obs), std::move(re), prior);
}

SimulatedData simulate_data(const Eigen::MatrixXd& X, const RandomEffectsStructure& re, const Eigen::VectorXd& beta,
                            const Eigen::VectorXd& tau, std::uint64_t seed) {
    if (beta.size() != X.cols()) throw ValidationError("simulate_data: beta length must equal the column count of X");
    if (tau.size() != re.r()) throw ValidationError("simulate_data: need one tau per random-effect block");
    if (re.Z.rows() != X.rows() && re.r() > 0) throw ValidationError("simulate_data: X and Z row counts differ");
    if (!(tau.array() > 0.0).all()) throw ValidationError("simulate_data: tau must be positive");

    RandomStream rng(seed);
    SimulatedData out;
    out.u.resize(re.total_q());
    for (Index j = 0; j < re.r(); ++j) {
        const double sd = 1.0 / std::sqrt(tau[j]);
        for (Index k = 0; k < re.q[j]; ++k) out.u[re.block_offsets[j] + k] = sd * rng.normal();
    }

    Eigen::VectorXd linear = X * beta;
    if (re.r() > 0) linear += re.Z * out.u;
    out.obs.X = X;
    out.obs.y.resize(X.rows());
    for (Index i = 0; i < X.rows(); ++i) out.obs.y[i] = rng.uniform() < normal_cdf(linear[i]) ? 1 : 0;
    return out;
}

} // namespace probitmm
