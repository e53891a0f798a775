#pragma once

#include <string>
#include <vector>

#include "lp/am.hpp"
#include "lp/networks.hpp"
#include "lp/synth.hpp"
#include "lp/tensor.hpp"

namespace lp {

struct ResponseMoments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    int count = 0;
};

ResponseMoments response_moments(const std::vector<double>& samples);

// One-dimensional Frechet distance between response distributions,
// (mu_a - mu_b)^2 + var_a + var_b - 2 sqrt(var_a var_b). Symmetric, zero only
// for matching moments; a tiny negative rounding residue is clamped.
double scalar_fid(const ResponseMoments& a, const ResponseMoments& b);

// Responses of the classifier over every 115-frame excerpt (stride 50) of the
// training split's 128-frame clips, largest n first. A negated ResponseSpec
// turns this into the bottom-n of the raw read-out.
std::vector<double> top_n_responses(const LoadedCorpus& corpus, const NetworkSpec& cls_spec,
                                    const std::vector<Tensor>& cls_params,
                                    const ResponseSpec& spec, int n);

struct GridResult {
    AMConfig config;
    double fid = 0.0;
    ResponseMoments generated;
};

struct GridSearchReport {
    std::vector<GridResult> ranked;  // ascending fid
    ResponseMoments real;
};

// The full hyper-parameter sweep: learning rate x prior weight x step count,
// three values each. Response, set size and seed come from base.
std::vector<AMConfig> paper_grid(const AMConfig& base);

// Runs every config, scores its explanation set against the real top-N
// moments (computed once) and returns the ascending-fid ranking with ties
// broken on (learning rate, prior weight, steps).
GridSearchReport grid_search(const std::vector<AMConfig>& grid, const LoadedCorpus& corpus,
                             const NetworkSpec& gen_spec, const std::vector<Tensor>& gen_params,
                             const NetworkSpec& cls_spec, const std::vector<Tensor>& cls_params);

void write_grid_report_json(const std::string& path, const GridSearchReport& report);
void write_grid_report_csv(const std::string& path, const GridSearchReport& report);

}  // namespace lp
