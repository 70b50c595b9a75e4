#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "omm/panel.hpp"
#include "omm/types.hpp"

namespace omm {

struct FeatureGroupSpec {
  std::string name;
  std::vector<std::string> columns;
  int components = 1;
};

/// Seven thematic groups (2+2+2+1+1+1+2 = 11 components) over the synthetic column names.
std::vector<FeatureGroupSpec> default_feature_groups();

struct StandardizerParams {
  std::vector<std::string> columns;
  Vector mean;
  Vector sd;
  Vector impute;               // training median of observed values
  std::vector<bool> constant;  // sd sentinel 1 was used

  /// Median-imputes NaNs, then z-scores. `raw` columns follow `columns`.
  Matrix apply(const Matrix& raw) const;
};

StandardizerParams fit_standardizer(const PanelDataset& train);

struct GroupPca {
  std::string name;
  std::vector<Index> columns;  // indices into StandardizerParams::columns
  Matrix loadings;             // members x components, orthonormal columns
  Vector eigenvalues;          // kept eigenvalues, non-increasing
  Vector explained_share;      // eigenvalue / total group variance
};

struct PcaModel {
  std::vector<GroupPca> groups;

  Index n_components() const;
  std::vector<std::string> component_names() const;
};

/// Top-k eigenvectors of each group's sample covariance. Sign convention: the
/// largest-magnitude entry of every loading vector is positive.
PcaModel pca_fit(const Matrix& standardized, const std::vector<std::string>& columns,
                 const std::vector<FeatureGroupSpec>& groups);

/// PC scores for already-standardized data.
Matrix pca_project(const PcaModel& model, const Matrix& standardized);

/// Imputes, standardizes and projects raw covariates (columns in `covariate_names` order).
Matrix pca_transform(const StandardizerParams& params, const PcaModel& model, const Matrix& raw,
                     const std::vector<std::string>& covariate_names);

/// Exponentially discounted cumulative sum with the given half-life:
/// d(t) = d(t-1) * 2^(-1/half_life) + x(t).
template <typename T>
std::vector<double> decay_feature(std::span<const T> history, double half_life) {
  const double factor = std::exp2(-1.0 / half_life);
  std::vector<double> out(history.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < history.size(); ++t) {
    acc = acc * factor + static_cast<double>(history[t]);
    out[t] = acc;
  }
  return out;
}

/// One decay step of `months` elapsed months followed by adding `value`.
inline double decay_step(double acc, double value, double half_life, int months = 1) {
  return acc * std::exp2(-static_cast<double>(months) / half_life) + value;
}

/// Decay over an observed series whose months may have gaps (unobserved months add zero).
std::vector<double> decay_series(const UnitSeries& unit, double half_life);

/// Fitted standardizer + PCA + decay half-life; the full model-input recipe.
struct FeaturePipeline {
  StandardizerParams standardizer;
  PcaModel pca;
  double half_life = 12.0;

  Index n_features() const { return pca.n_components() + 1; }
  std::vector<std::string> feature_names() const;
  /// PC scores for a single raw covariate row (columns in `covariate_names` order).
  Vector exogenous_row(const Vector& raw, const std::vector<std::string>& covariate_names) const;
};

FeaturePipeline fit_feature_pipeline(const PanelDataset& train, const std::vector<FeatureGroupSpec>& groups,
                                     double half_life);

/// Dense model inputs; rows are (unit, month) in panel order, PC columns then decay.
struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<Index> unit_offset;  // first row of each panel unit
  Matrix values;
};

FeatureMatrix build_feature_matrix(const PanelDataset& panel, const FeaturePipeline& pipeline);

namespace io {
class BinaryWriter;
class BinaryReader;
}  // namespace io

void save(io::BinaryWriter& w, const FeaturePipeline& p);
FeaturePipeline load_feature_pipeline(io::BinaryReader& r);

}  // namespace omm
