#pragma once

#include <string>
#include <vector>

#include "dbwqs/diagnostics.hpp"
#include "dbwqs/matrix.hpp"
#include "dbwqs/model.hpp"
#include "dbwqs/sampler.hpp"

namespace dbwqs {

// Posterior effect estimates derived from theta draws.
//
// Absolute scale: per draw, b_ref (the multiplicative change of the reference
// category's proportion for a one-unit increase in the mixture index) is
// averaged over subjects; the category-k ratio is exp(theta_k) * avg(b_ref)
// and the reference ratio is avg(b_ref) itself.  Percent change is
// (ratio - 1) * 100.  Relative scale: theta_k draws directly (reference
// omitted).
struct EffectTable {
  std::vector<std::string> category_names;          // size K
  std::vector<Matrix> ratio_draws;                  // per chain: kept x K
  std::vector<ParameterSummary> absolute_pct;       // size K
  std::vector<ParameterSummary> relative_theta;     // size K-1 (k = 2..K)
};

// Per-subject b_ref for one posterior draw, log-sum-exp stabilized.
std::vector<double> b_ref_per_subject(const ParameterState& draw,
                                      const DbwqsData& data);

// Absolute-scale table (also fills the relative summaries).  Category names
// default to category_1..K when empty.
EffectTable absolute_change(const PosteriorDraws& draws, const DbwqsData& data,
                            std::vector<std::string> category_names = {});

// Relative-scale summaries only.
EffectTable relative_change(const PosteriorDraws& draws,
                            std::vector<std::string> category_names = {});

}  // namespace dbwqs
