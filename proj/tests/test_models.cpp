#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "lp/checkpoint.hpp"
#include "lp/frontend.hpp"
#include "lp/networks.hpp"
#include "lp/rng.hpp"

using namespace lp;

namespace {

MelSpectrogram random_mel(Rng& rng, int frames) {
    MelSpectrogram m;
    m.frames = frames;
    m.bands = kMelBands;
    m.values.resize(std::size_t(frames) * kMelBands);
    for (auto& v : m.values) v = rng.normal() * 3.0 - 4.0;
    return m;
}

std::vector<Shape> layer_shapes(const NetworkSpec& spec) {
    Graph g;
    NetworkInstance inst = append_network(g, spec, g.leaf(spec.input_shape));
    std::vector<Shape> out;
    for (NodeId id : inst.layer_outputs) out.push_back(g.node(id).shape);
    return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
    std::filesystem::path dir = std::filesystem::path("t_models") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("classifier layer shapes match the published architecture") {
    NetworkSpec spec = build_classifier(1.0);
    std::vector<Shape> want = {{64, 113, 78}, {32, 111, 76}, {32, 37, 25}, {128, 35, 23}, {64, 33, 21},
                               {64, 11, 7},   {256},         {64},         {1}};
    std::vector<Shape> got = layer_shapes(spec);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == want[i]);

    std::int64_t m_total = 0;
    for (const Shape& s : want) m_total += shape_numel(s);
    CHECK(m_total == 1016289);

    Rng rng(21);
    auto params = init_params(build_classifier(0.25), 4);
    ActivationRecord rec = classifier_forward(build_classifier(0.25), params, random_mel(rng, 115));
    std::int64_t sum = 0;
    for (const Tensor& t : rec.layer_values) sum += shape_numel(t.dims);
    CHECK(rec.total_neurons == sum);
}

TEST_CASE("generator layer shapes double spatially per block") {
    NetworkSpec spec = build_generator(1.0);
    CHECK(spec.latent_dim == 128);
    std::vector<Shape> want = {{5120}, {64, 16, 10}, {32, 32, 20}, {16, 64, 40}, {8, 128, 80}, {1, 128, 80}};
    std::vector<Shape> got = layer_shapes(spec);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == want[i]);

    auto names = param_names(spec);
    CHECK(std::find(names.begin(), names.end(), "convt3.w") != names.end());
    auto shapes = param_shapes(spec);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == "convt1.w") CHECK(shapes[i] == Shape{128, 64, 5, 10});
        if (names[i] == "convt4.w") CHECK(shapes[i] == Shape{16, 8, 5, 20});
        if (names[i] == "out.w") CHECK(shapes[i] == Shape{1, 8, 5, 5});
        if (names[i] == "fc.w") CHECK(shapes[i] == Shape{5120, 128});
    }
}

TEST_CASE("discriminator layer shapes halve spatially per block") {
    NetworkSpec spec = build_discriminator(1.0);
    std::vector<Shape> want = {{32, 64, 40}, {64, 32, 20}, {128, 16, 10}, {256, 8, 5}, {1}};
    std::vector<Shape> got = layer_shapes(spec);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == want[i]);

    auto names = param_names(spec);
    auto shapes = param_shapes(spec);
    bool saw_score_w = false;
    for (std::size_t i = 0; i < names.size(); ++i) {
        CHECK(names[i] != "score.b");
        if (names[i] == "score.w") {
            saw_score_w = true;
            CHECK(shapes[i] == Shape{1, 10240});
        }
    }
    CHECK(saw_score_w);
}

TEST_CASE("tiny profile scales channels but keeps spatial dims") {
    CHECK(profile_multiplier("paper") == 1.0);
    CHECK(profile_multiplier("tiny") == 0.25);
    CHECK_THROWS_AS(profile_multiplier("huge"), std::invalid_argument);
    CHECK_THROWS_AS(build_classifier(0.5), std::invalid_argument);

    std::vector<Shape> cls = layer_shapes(build_classifier(0.25));
    CHECK(cls[0] == Shape{16, 113, 78});
    CHECK(cls[5] == Shape{16, 11, 7});
    CHECK(cls[6] == Shape{64});

    NetworkSpec gen = build_generator(0.25);
    CHECK(gen.latent_dim == 32);
    std::vector<Shape> gl = layer_shapes(gen);
    CHECK(gl[0] == Shape{1280});
    CHECK(gl[3] == Shape{4, 64, 40});
    CHECK(gl[5] == Shape{1, 128, 80});

    auto dn = param_names(build_discriminator(0.25));
    auto ds = param_shapes(build_discriminator(0.25));
    for (std::size_t i = 0; i < dn.size(); ++i)
        if (dn[i] == "score.w") CHECK(ds[i] == Shape{1, 2560});
}

TEST_CASE("zero parameters give logit zero and probability one half") {
    NetworkSpec spec = build_classifier(0.25);
    std::vector<Tensor> params;
    for (const Shape& s : param_shapes(spec)) params.push_back(Tensor::zeros(s));
    Rng rng(31);
    ActivationRecord rec = classifier_forward(spec, params, random_mel(rng, 115));
    CHECK(rec.logit == 0.0);
    CHECK(rec.probability == 0.5);
}

TEST_CASE("probability is the sigmoid of the logit") {
    NetworkSpec spec = build_classifier(0.25);
    auto params = init_params(spec, 7);
    Rng rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        ActivationRecord rec = classifier_forward(spec, params, random_mel(rng, 115));
        double want = 1.0 / (1.0 + std::exp(-rec.logit));
        CHECK(std::abs(rec.probability - want) < 1e-12);
    }
}

TEST_CASE("generator output respects the clamp floor and crop") {
    NetworkSpec spec = build_generator(0.25);
    auto params = init_params(spec, 3);
    Rng rng(4);
    std::vector<double> z(spec.latent_dim);
    for (auto& v : z) v = rng.normal();

    Tensor raw = generator_forward_raw(spec, params, z);
    REQUIRE(raw.dims == Shape{1, kGanFrames, kMelBands});
    double floor_val = std::log(1e-7);
    for (double v : raw.data) CHECK(v >= floor_val);

    MelSpectrogram out = generator_forward(spec, params, z);
    REQUIRE(out.frames == kClipFrames);
    REQUIRE(out.bands == kMelBands);
    for (int t = 0; t < kClipFrames; ++t)
        for (int b = 0; b < kMelBands; ++b)
            CHECK(out.at(t, b) == raw.data[std::size_t(t + kCropLead) * kMelBands + b]);

    MelSpectrogram again = generator_forward(spec, params, z);
    CHECK(std::memcmp(out.values.data(), again.values.data(), out.values.size() * sizeof(double)) == 0);
}

TEST_CASE("parameter initialisation is seeded and He scaled") {
    NetworkSpec spec = build_classifier(0.25);
    auto a = init_params(spec, 11);
    auto b = init_params(spec, 11);
    auto c = init_params(spec, 12);
    REQUIRE(a.size() == b.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].data == b[i].data);
        if (a[i].data != c[i].data) any_diff = true;
    }
    CHECK(any_diff);

    auto names = param_names(spec);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i].size() >= 2 && names[i].substr(names[i].size() - 2) == ".b") {
            for (double v : a[i].data) CHECK(v == 0.0);
        }
        if (names[i] == "fc1.w") {
            double fan_in = double(a[i].dims[1]);
            double mean = std::accumulate(a[i].data.begin(), a[i].data.end(), 0.0) / double(a[i].data.size());
            double var = 0.0;
            for (double v : a[i].data) var += (v - mean) * (v - mean);
            var /= double(a[i].data.size() - 1);
            CHECK(std::sqrt(var) == doctest::Approx(std::sqrt(2.0 / fan_in)).epsilon(0.05));
        }
    }
}

TEST_CASE("classifier input gradient matches finite differences") {
    NetworkSpec spec = build_classifier(0.25);
    auto params = init_params(spec, 17);

    Graph g;
    NodeId in = g.leaf(spec.input_shape, "x");
    NetworkInstance inst = append_network(g, spec, in);

    Rng rng(18);
    Tensor x = Tensor::zeros(spec.input_shape);
    for (auto& v : x.data) v = rng.normal();

    std::vector<Binding> binds;
    for (std::size_t i = 0; i < params.size(); ++i) binds.emplace_back(inst.params[i], &params[i]);
    binds.emplace_back(in, &x);

    auto grads = backward(g, binds, inst.output);
    REQUIRE(grads.count(in) == 1);
    const Tensor& gx = grads.at(in);
    REQUIRE(gx.dims == x.dims);

    std::vector<NodeId> outs{inst.output};
    const double h = 1e-5;
    for (int probe = 0; probe < 100; ++probe) {
        std::size_t idx = std::size_t(rng.uniform01() * double(x.data.size()));
        if (idx >= x.data.size()) idx = x.data.size() - 1;
        double keep = x.data[idx];
        x.data[idx] = keep + h;
        double up = forward(g, binds, outs).at(inst.output).data[0];
        x.data[idx] = keep - h;
        double dn = forward(g, binds, outs).at(inst.output).data[0];
        x.data[idx] = keep;
        double fd = (up - dn) / (2.0 * h);
        double an = gx.data[idx];
        double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("network fingerprints separate architectures") {
    auto c1 = spec_fingerprint(build_classifier(1.0));
    auto c1b = spec_fingerprint(build_classifier(1.0));
    auto ct = spec_fingerprint(build_classifier(0.25));
    auto d1 = spec_fingerprint(build_discriminator(1.0));
    auto g1 = spec_fingerprint(build_generator(1.0));
    CHECK(c1 == c1b);
    CHECK(c1 != ct);
    CHECK(c1 != d1);
    CHECK(d1 != g1);
}

TEST_CASE("checkpoints round-trip and replay the same logit") {
    auto dir = fresh_dir("ckpt");
    NetworkSpec spec = build_classifier(0.25);
    auto params = init_params(spec, 99);

    auto p1 = dir / "cls.nprm";
    auto p2 = dir / "cls2.nprm";
    save_checkpoint(p1.string(), spec, params);
    Checkpoint ckpt = load_checkpoint(p1.string());
    CHECK(ckpt.names == param_names(spec));
    CHECK(ckpt.fingerprint == spec_fingerprint(spec));

    auto loaded = checkpoint_params(ckpt, spec);
    REQUIRE(loaded.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        REQUIRE(loaded[i].dims == params[i].dims);
        for (std::size_t k = 0; k < params[i].data.size(); ++k)
            CHECK(loaded[i].data[k] == double(float(params[i].data[k])));
    }

    save_checkpoint(p2.string(), spec, loaded);
    std::string bytes1 = slurp(p1);
    CHECK(bytes1 == slurp(p2));
    CHECK(bytes1.substr(0, 4) == "NPRM");

    Rng rng(5);
    MelSpectrogram x = random_mel(rng, 115);
    double logit_a = classifier_forward(spec, loaded, x).logit;
    double logit_b = classifier_forward(spec, load_params(p1.string(), spec), x).logit;
    CHECK(logit_a == logit_b);
}

TEST_CASE("checkpoint loader rejects damaged and foreign files") {
    auto dir = fresh_dir("ckpt_bad");
    NetworkSpec cls = build_classifier(0.25);
    auto p = dir / "cls.nprm";
    save_checkpoint(p.string(), cls, init_params(cls, 1));
    std::string bytes = slurp(p);

    auto write_raw = [&dir](const std::string& name, const std::string& content) {
        auto path = dir / name;
        std::ofstream out(path, std::ios::binary);
        out.write(content.data(), std::streamsize(content.size()));
        return path;
    };

    auto trunc = write_raw("trunc.nprm", bytes.substr(0, bytes.size() - 40));
    CHECK_THROWS_WITH_AS(load_checkpoint(trunc.string()), doctest::Contains("truncated"),
                         std::runtime_error);

    std::string bad = bytes;
    bad[0] = 'X';
    auto magic = write_raw("magic.nprm", bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(magic.string()), doctest::Contains("bad magic"),
                         std::runtime_error);

    auto trail = write_raw("trail.nprm", bytes + "z");
    CHECK_THROWS_WITH_AS(load_checkpoint(trail.string()), doctest::Contains("trailing"),
                         std::runtime_error);

    Checkpoint ok = load_checkpoint(p.string());
    CHECK_THROWS_WITH_AS(checkpoint_params(ok, build_discriminator(0.25)),
                         doctest::Contains("fingerprint mismatch"), std::runtime_error);
    CHECK_THROWS_WITH_AS(load_params(p.string(), build_classifier(1.0)),
                         doctest::Contains("fingerprint mismatch"), std::runtime_error);
}

TEST_CASE("shared parameter leaves are reused across instantiations") {
    NetworkSpec spec = build_discriminator(0.25);
    Graph g;
    NodeId in1 = g.leaf(spec.input_shape);
    NodeId in2 = g.leaf(spec.input_shape);
    NetworkInstance a = append_network(g, spec, in1);
    NetworkInstance b = append_network(g, spec, in2, &a.params);
    CHECK(a.params == b.params);

    auto params = init_params(spec, 2);
    Rng rng(6);
    Tensor x = Tensor::zeros(spec.input_shape);
    for (auto& v : x.data) v = rng.normal();

    std::vector<Binding> binds;
    for (std::size_t i = 0; i < params.size(); ++i) binds.emplace_back(a.params[i], &params[i]);
    binds.emplace_back(in1, &x);
    binds.emplace_back(in2, &x);
    std::vector<NodeId> outs{a.output, b.output};
    auto vals = forward(g, binds, outs);
    CHECK(vals.at(a.output).data[0] == vals.at(b.output).data[0]);
}
