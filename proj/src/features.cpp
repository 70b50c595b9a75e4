#include "omm/features.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/Eigenvalues>

#include "omm/errors.hpp"
#include "omm/io.hpp"

namespace omm {

std::vector<FeatureGroupSpec> default_feature_groups() {
  auto cols = [](const std::string& g, int n) {
    std::vector<std::string> out;
    for (int k = 1; k <= n; ++k) out.push_back(g + "_" + std::to_string(k));
    return out;
  };
  return {
      {"vdem", cols("vdem", 4), 2},
      {"violence_history", cols("violence_history", 3), 2},
      {"wdi", cols("wdi", 4), 2},
      {"military_expenditure", cols("military_expenditure", 2), 1},
      {"demographics", cols("demographics", 2), 1},
      {"environment", cols("environment", 2), 1},
      {"neighborhood", cols("neighborhood", 3), 2},
  };
}

namespace {

double median_of(std::vector<double> v) {
  const auto n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix stack_covariates(const PanelDataset& panel) {
  Matrix out(panel.n_rows(), panel.n_covariates());
  Index r = 0;
  for (const auto& u : panel.units) {
    out.middleRows(r, u.size()) = u.covariates;
    r += u.size();
  }
  return out;
}

/// Column permutation mapping fitted columns onto `names`.
std::vector<Index> match_columns(const std::vector<std::string>& fitted, const std::vector<std::string>& names) {
  std::vector<Index> idx;
  idx.reserve(fitted.size());
  for (const auto& c : fitted) {
    auto it = std::find(names.begin(), names.end(), c);
    if (it == names.end()) throw DataError("unknown covariate column: fitted column '" + c + "' is absent");
    idx.push_back(static_cast<Index>(it - names.begin()));
  }
  return idx;
}

}  // namespace

Matrix StandardizerParams::apply(const Matrix& raw) const {
  if (raw.cols() != static_cast<Index>(columns.size()))
    throw DataError("standardizer expects " + std::to_string(columns.size()) + " columns, got " +
                    std::to_string(raw.cols()));
  Matrix z = raw;
  for (Index c = 0; c < z.cols(); ++c) {
    for (Index i = 0; i < z.rows(); ++i) {
      double& v = z(i, c);
      if (std::isnan(v)) v = impute(c);
      v = (v - mean(c)) / sd(c);
    }
  }
  return z;
}

StandardizerParams fit_standardizer(const PanelDataset& train) {
  if (train.n_rows() == 0) throw DataError("fit_standardizer: empty training panel");
  const Matrix raw = stack_covariates(train);
  const Index n = raw.rows();
  StandardizerParams p;
  p.columns = train.covariate_names;
  p.mean.resize(raw.cols());
  p.sd.resize(raw.cols());
  p.impute.resize(raw.cols());
  p.constant.assign(static_cast<std::size_t>(raw.cols()), false);
  for (Index c = 0; c < raw.cols(); ++c) {
    std::vector<double> observed;
    for (Index i = 0; i < n; ++i)
      if (!std::isnan(raw(i, c))) observed.push_back(raw(i, c));
    if (observed.empty()) throw DataError("fit_standardizer: column '" + p.columns[static_cast<std::size_t>(c)] + "' is entirely missing");
    p.impute(c) = median_of(observed);
    // Moments of the imputed column, so transformed training data is exactly centred.
    Vector col = raw.col(c).unaryExpr([&](double v) { return std::isnan(v) ? p.impute(c) : v; });
    p.mean(c) = col.mean();
    const double ss = (col.array() - p.mean(c)).square().sum();
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (!(sd > 0.0)) {
      p.sd(c) = 1.0;
      p.constant[static_cast<std::size_t>(c)] = true;
    } else {
      p.sd(c) = sd;
    }
  }
  return p;
}

Index PcaModel::n_components() const {
  Index k = 0;
  for (const auto& g : groups) k += g.loadings.cols();
  return k;
}

std::vector<std::string> PcaModel::component_names() const {
  std::vector<std::string> names;
  for (const auto& g : groups)
    for (Index k = 0; k < g.loadings.cols(); ++k) names.push_back(g.name + "_pc" + std::to_string(k + 1));
  return names;
}

PcaModel pca_fit(const Matrix& standardized, const std::vector<std::string>& columns,
                 const std::vector<FeatureGroupSpec>& groups) {
  if (standardized.rows() < 2) throw DataError("pca_fit: need at least 2 rows");
  PcaModel model;
  for (const auto& spec : groups) {
    if (spec.components < 1 || spec.components > static_cast<int>(spec.columns.size()))
      throw ValidationError("feature group '" + spec.name + "': components must lie in [1, " +
                            std::to_string(spec.columns.size()) + "]");
    GroupPca g;
    g.name = spec.name;
    g.columns = match_columns(spec.columns, columns);

    Matrix block(standardized.rows(), static_cast<Index>(g.columns.size()));
    for (std::size_t j = 0; j < g.columns.size(); ++j) block.col(static_cast<Index>(j)) = standardized.col(g.columns[j]);
    const Matrix centered = block.rowwise() - block.colwise().mean();
    const Matrix cov = (centered.adjoint() * centered) / static_cast<double>(block.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success) throw ModelError("pca_fit: eigen decomposition failed for group '" + spec.name + "'");
    // Eigen returns ascending eigenvalues.
    const Vector values = eig.eigenvalues().reverse();
    const Matrix vectors = eig.eigenvectors().rowwise().reverse();
    const double total = std::max(values.sum(), 0.0);
    const double tol = 1e-10 * std::max(total, 1.0);
    const Index k = spec.components;
    Index rank = 0;
    for (Index i = 0; i < values.size(); ++i)
      if (values(i) > tol) ++rank;
    if (k > rank)
      throw ModelError("pca_fit: group '" + spec.name + "' has rank " + std::to_string(rank) + " < " +
                       std::to_string(k) + " requested components");

    g.loadings = vectors.leftCols(k);
    for (Index j = 0; j < k; ++j) {
      Index arg = 0;
      g.loadings.col(j).cwiseAbs().maxCoeff(&arg);
      if (g.loadings(arg, j) < 0.0) g.loadings.col(j) *= -1.0;
    }
    g.eigenvalues = values.head(k);
    g.explained_share = g.eigenvalues / total;
    model.groups.push_back(std::move(g));
  }
  return model;
}

Matrix pca_project(const PcaModel& model, const Matrix& standardized) {
  Matrix scores(standardized.rows(), model.n_components());
  Index offset = 0;
  for (const auto& g : model.groups) {
    Matrix block(standardized.rows(), static_cast<Index>(g.columns.size()));
    for (std::size_t j = 0; j < g.columns.size(); ++j) block.col(static_cast<Index>(j)) = standardized.col(g.columns[j]);
    scores.middleCols(offset, g.loadings.cols()).noalias() = block * g.loadings;
    offset += g.loadings.cols();
  }
  return scores;
}

Matrix pca_transform(const StandardizerParams& params, const PcaModel& model, const Matrix& raw,
                     const std::vector<std::string>& covariate_names) {
  const auto idx = match_columns(params.columns, covariate_names);
  Matrix aligned(raw.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) aligned.col(static_cast<Index>(j)) = raw.col(idx[j]);
  return pca_project(model, params.apply(aligned));
}

std::vector<double> decay_series(const UnitSeries& unit, double half_life) {
  std::vector<double> out(unit.months.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < unit.months.size(); ++t) {
    const int elapsed = t == 0 ? 0 : unit.months[t] - unit.months[t - 1];
    acc = decay_step(acc, static_cast<double>(unit.fatalities[t]), half_life, elapsed);
    out[t] = acc;
  }
  return out;
}

std::vector<std::string> FeaturePipeline::feature_names() const {
  auto names = pca.component_names();
  names.push_back("fatality_decay");
  return names;
}

Vector FeaturePipeline::exogenous_row(const Vector& raw, const std::vector<std::string>& covariate_names) const {
  const Matrix scores = pca_transform(standardizer, pca, raw.transpose(), covariate_names);
  return scores.row(0).transpose();
}

FeaturePipeline fit_feature_pipeline(const PanelDataset& train, const std::vector<FeatureGroupSpec>& groups,
                                     double half_life) {
  if (!(half_life > 0.0)) throw ValidationError("features.half_life must be > 0");
  FeaturePipeline p;
  p.standardizer = fit_standardizer(train);
  p.pca = pca_fit(p.standardizer.apply(stack_covariates(train)), p.standardizer.columns, groups);
  p.half_life = half_life;
  return p;
}

FeatureMatrix build_feature_matrix(const PanelDataset& panel, const FeaturePipeline& pipeline) {
  FeatureMatrix fm;
  fm.columns = pipeline.feature_names();
  const Index n_pc = pipeline.pca.n_components();
  fm.values.resize(panel.n_rows(), n_pc + 1);
  fm.values.leftCols(n_pc) =
      pca_transform(pipeline.standardizer, pipeline.pca, stack_covariates(panel), panel.covariate_names);
  Index r = 0;
  for (const auto& u : panel.units) {
    fm.unit_offset.push_back(r);
    const auto decay = decay_series(u, pipeline.half_life);
    for (Index i = 0; i < u.size(); ++i) fm.values(r + i, n_pc) = decay[static_cast<std::size_t>(i)];
    r += u.size();
  }
  return fm;
}

void save(io::BinaryWriter& w, const FeaturePipeline& p) {
  w.put(p.standardizer.columns);
  w.put(p.standardizer.mean);
  w.put(p.standardizer.sd);
  w.put(p.standardizer.impute);
  std::vector<std::uint8_t> constant(p.standardizer.constant.begin(), p.standardizer.constant.end());
  w.put(constant);
  w.put<std::uint64_t>(p.pca.groups.size());
  for (const auto& g : p.pca.groups) {
    w.put(g.name);
    w.put(std::vector<std::int64_t>(g.columns.begin(), g.columns.end()));
    w.put(g.loadings);
    w.put(g.eigenvalues);
    w.put(g.explained_share);
  }
  w.put(p.half_life);
}

FeaturePipeline load_feature_pipeline(io::BinaryReader& r) {
  FeaturePipeline p;
  p.standardizer.columns = r.get_strings();
  p.standardizer.mean = r.get_eigen_vector();
  p.standardizer.sd = r.get_eigen_vector();
  p.standardizer.impute = r.get_eigen_vector();
  const auto constant = r.get_vector<std::uint8_t>();
  p.standardizer.constant.assign(constant.begin(), constant.end());
  const auto n_groups = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_groups; ++i) {
    GroupPca g;
    g.name = r.get_string();
    const auto cols = r.get_vector<std::int64_t>();
    g.columns.assign(cols.begin(), cols.end());
    g.loadings = r.get_matrix();
    g.eigenvalues = r.get_eigen_vector();
    g.explained_share = r.get_eigen_vector();
    p.pca.groups.push_back(std::move(g));
  }
  p.half_life = r.get<double>();
  return p;
}

}  // namespace omm
