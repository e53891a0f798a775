#include "lp/fid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace lp {

ResponseMoments response_moments(const std::vector<double>& samples) {
    if (samples.size() < 2)
        throw std::invalid_argument("response_moments: need at least 2 samples, got " +
                                    std::to_string(samples.size()));
    double sum = 0.0;
    for (double s : samples) {
        if (!std::isfinite(s)) throw std::invalid_argument("response_moments: non-finite sample");
        sum += s;
    }
    ResponseMoments m;
    m.count = int(samples.size());
    m.mean = sum / double(samples.size());
    double sq = 0.0;
    for (double s : samples) sq += (s - m.mean) * (s - m.mean);
    m.variance = sq / double(samples.size() - 1);
    return m;
}

double scalar_fid(const ResponseMoments& a, const ResponseMoments& b) {
    if (a.variance < 0.0 || b.variance < 0.0)
        throw std::invalid_argument("scalar_fid: negative variance");
    double md = a.mean - b.mean;
    // Sum the variances first; the grouping keeps the expression exactly
    // symmetric in its arguments.
    double d = md * md + (a.variance + b.variance) - 2.0 * std::sqrt(a.variance * b.variance);
    if (d < 0.0) {
        if (d < -1e-12)
            throw std::logic_error("scalar_fid: distance " + std::to_string(d) +
                                   " below rounding tolerance");
        d = 0.0;
    }
    return d;
}

std::vector<double> top_n_responses(const LoadedCorpus& corpus, const NetworkSpec& cls_spec,
                                    const std::vector<Tensor>& cls_params,
                                    const ResponseSpec& spec, int n) {
    if (n < 1) throw std::invalid_argument("top_n_responses: n must be positive");

    struct Excerpt {
        const MelSpectrogram* clip;
        int start;
    };
    std::vector<Excerpt> excerpts;
    for (std::size_t idx : corpus.train_idx) {
        const MelSpectrogram& clip = corpus.clips[idx].clip128;
        if (clip.frames < kClipFrames) continue;
        int count = (clip.frames - kClipFrames) / 50 + 1;
        for (int e = 0; e < count; ++e) excerpts.push_back({&clip, e * 50});
    }
    if (int(excerpts.size()) < n)
        throw std::invalid_argument("top_n_responses: need " + std::to_string(n) +
                                    " excerpts, corpus yields " +
                                    std::to_string(excerpts.size()));

    std::vector<double> responses(excerpts.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < excerpts.size(); ++i) {
        MelSpectrogram window = crop_mel(*excerpts[i].clip, excerpts[i].start, kClipFrames);
        responses[i] = evaluate_response(classifier_forward(cls_spec, cls_params, window), spec);
    }
    std::sort(responses.begin(), responses.end(), std::greater<double>());
    responses.resize(std::size_t(n));
    return responses;
}

std::vector<AMConfig> paper_grid(const AMConfig& base) {
    const double rates[] = {0.1, 0.01, 0.001};
    const double weights[] = {0.1, 0.01, 0.001};
    const int steps[] = {100, 500, 1000};
    std::vector<AMConfig> grid;
    for (double lr : rates)
        for (double w : weights)
            for (int nt : steps) {
                AMConfig cfg = base;
                cfg.learning_rate = lr;
                cfg.prior_weight = w;
                cfg.steps = nt;
                grid.push_back(cfg);
            }
    return grid;
}

GridSearchReport grid_search(const std::vector<AMConfig>& grid, const LoadedCorpus& corpus,
                             const NetworkSpec& gen_spec, const std::vector<Tensor>& gen_params,
                             const NetworkSpec& cls_spec, const std::vector<Tensor>& cls_params) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    const ResponseSpec& resp = grid[0].response;
    for (const AMConfig& cfg : grid) {
        bool same = cfg.response.kind == resp.kind && cfg.response.layer == resp.layer &&
                    cfg.response.index == resp.index && cfg.response.negate == resp.negate &&
                    cfg.set_size == grid[0].set_size;
        if (!same)
            throw std::invalid_argument(
                "grid_search: all configs must share the response and set size");
    }

    GridSearchReport report;
    report.real = response_moments(
        top_n_responses(corpus, cls_spec, cls_params, resp, grid[0].set_size));

    for (const AMConfig& cfg : grid) {
        ExplanationSet set = generate_explanations(cfg, gen_spec, gen_params, cls_spec, cls_params);
        std::vector<double> responses;
        responses.reserve(set.items.size());
        for (const Explanation& e : set.items) responses.push_back(e.final_response);
        GridResult r;
        r.config = cfg;
        r.generated = response_moments(responses);
        r.fid = scalar_fid(report.real, r.generated);
        report.ranked.push_back(std::move(r));
    }

    std::sort(report.ranked.begin(), report.ranked.end(),
              [](const GridResult& a, const GridResult& b) {
                  return std::tie(a.fid, a.config.learning_rate, a.config.prior_weight,
                                  a.config.steps) < std::tie(b.fid, b.config.learning_rate,
                                                             b.config.prior_weight, b.config.steps);
              });
    return report;
}

namespace {

nlohmann::json grid_row(const GridResult& r, const ResponseMoments& real) {
    return {{"l_r", r.config.learning_rate}, {"lambda", r.config.prior_weight},
            {"N_t", r.config.steps},         {"fid", r.fid},
            {"mu_g", r.generated.mean},      {"var_g", r.generated.variance},
            {"mu_r", real.mean},             {"var_r", real.variance},
            {"n", r.generated.count}};
}

}  // namespace

void write_grid_report_json(const std::string& path, const GridSearchReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const GridResult& r : report.ranked) rows.push_back(grid_row(r, report.real));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("grid report: cannot open " + path + " for writing");
    out << rows.dump(2) << '\n';
    if (!out) throw std::runtime_error("grid report: short write to " + path);
}

void write_grid_report_csv(const std::string& path, const GridSearchReport& report) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("grid report: cannot open " + path + " for writing");
    out << "l_r,lambda,N_t,fid,mu_g,var_g,mu_r,var_r,n\n";
    for (const GridResult& r : report.ranked) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                      r.config.learning_rate, r.config.prior_weight, r.config.steps, r.fid,
                      r.generated.mean, r.generated.variance, report.real.mean,
                      report.real.variance, r.generated.count);
        out << buf;
    }
    if (!out) throw std::runtime_error("grid report: short write to " + path);
}

}  // namespace lp
