// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and
// runtime limits are fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "adbs/checkpoint.hpp"
#include "adbs/cli.hpp"
#include "adbs/config.hpp"
#include "adbs/protocol.hpp"
#include "oracles.hpp"

using namespace adbs;
namespace fs = std::filesystem;

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradAbsTol = 1e-6;
constexpr double kGradAbsThreshold = 1e-6;
constexpr double kKinkMargin = 1e-3;
constexpr double kProbSlack = 1e-12;
constexpr double kClosedFormTol = 1e-6;
constexpr double kMeanInitTol = 1e-15;
constexpr std::size_t kGradConfigs = 100;
constexpr std::size_t kSweepConfigs = 1000;
constexpr std::size_t kBenchmarkSeeds = 20;

struct Verdict {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double time_limit_s, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream timing;
    timing.precision(3);
    timing << std::fixed << secs << " s";
    if (time_limit_s > 0) {
        timing << " (limit " << time_limit_s << " s)";
        if (secs >= time_limit_s) {
            v.pass = false;
            v.detail += "; runtime limit exceeded";
        }
    }
    if (!v.pass) ++failures;
    std::printf("%s %d %s: %s [%s]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), timing.str().c_str());
    std::fflush(stdout);
}

oracle::Vec gaussian(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    oracle::Vec v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

oracle::Vec unit(oracle::Vec v) {
    const long double n = oracle::length(v);
    for (auto& x : v) x = static_cast<double>(x / n);
    return v;
}

Matrix to_matrix(const oracle::Cols& cols) {
    Matrix m;
    for (const auto& c : cols) m.append_col(c);
    return m;
}

// Compares one analytic gradient entry with its finite-difference estimate.
struct GradTally {
    std::size_t entries = 0, bad = 0;
    double worst = 0.0;
    void add(double analytic, double numeric) {
        ++entries;
        double err;
        bool ok;
        if (std::abs(analytic) > kGradAbsThreshold) {
            err = std::abs(analytic - numeric) / std::abs(analytic);
            ok = err <= kGradRelTol;
        } else {
            err = std::abs(analytic - numeric);
            ok = err <= kGradAbsTol;
        }
        worst = std::max(worst, err);
        if (!ok) ++bad;
    }
};

RunConfig reference_config(std::uint64_t seed) {
    RunConfig c;  // defaults are the reference benchmark
    c.seed = seed;
    return c;
}

// 1 ---------------------------------------------------------------------

// Independently coded prototype pipeline: base classifier and extractor as
// produced by base training, novel classes by their feature means, argmax
// of cosine similarity.
Verdict baseline_equivalence() {
    std::size_t checked = 0, mismatched = 0;
    for (int variant = 0; variant < 2; ++variant) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            RunConfig rc = reference_config(seed);
            if (variant == 1) rc.train.base_epochs = 0;  // pure class-mean initialisation
            TrainConfig cfg = rc.train_config();
            cfg.ablation = Ablation::fixed_baseline;
            const FscilStream stream = rc.make_stream();
            const RunResult run = run_full(stream, cfg, rc.make_extractor(stream.feature_dim));

            const auto& base = run.checkpoints.front();
            const auto embed = [&](const oracle::Vec& raw) {
                const auto& p = base.extractor.projection();
                if (base.extractor.kind() == ExtractorKind::identity) return raw;
                oracle::Vec out(p.rows(), 0.0);
                for (std::size_t r = 0; r < p.rows(); ++r)
                    for (std::size_t c = 0; c < p.cols(); ++c) out[r] += p(r, c) * raw[c];
                return out;
            };
            oracle::Cols means;
            if (variant == 1) {
                oracle::Cols sums(stream.base_class_count);
                std::vector<std::size_t> n(stream.base_class_count, 0);
                for (const auto& e : stream.base_train) {
                    const auto f = embed(e.raw);
                    if (sums[e.label].empty()) sums[e.label].assign(f.size(), 0.0);
                    for (std::size_t i = 0; i < f.size(); ++i) sums[e.label][i] += f[i];
                    ++n[e.label];
                }
                means = sums;
            } else {
                for (std::size_t c = 0; c < stream.base_class_count; ++c) {
                    const auto col = base.classifier.weights.col(c);
                    means.emplace_back(col.begin(), col.end());
                }
            }
            for (std::size_t t = 0; t < stream.num_sessions(); ++t) {
                if (t > 0) {
                    const auto& train = stream.increments[t - 1].train;
                    const auto [first, count] = stream.class_range(t);
                    oracle::Cols sums(count);
                    for (const auto& e : train) {
                        const auto f = embed(e.raw);
                        auto& s = sums[e.label - first];
                        if (s.empty()) s.assign(f.size(), 0.0);
                        for (std::size_t i = 0; i < f.size(); ++i) s[i] += f[i];
                    }
                    for (auto& s : sums) means.push_back(s);  // scale does not affect cosine
                }
                for (const auto& e : stream.cumulative_test(t)) {
                    const auto f = base.extractor.extract(e.raw);
                    const std::size_t ours = predict(run.checkpoints[t].classifier, f);
                    const std::size_t theirs = oracle::ncm_predict(means, embed(e.raw));
                    ++checked;
                    if (ours != theirs) ++mismatched;
                }
            }
        }
    }
    return {mismatched == 0, std::to_string(checked - mismatched) + "/" + std::to_string(checked) +
                                 " predictions equal (3 seeds, trained and untrained base)"};
}

// 2 ---------------------------------------------------------------------

Verdict gradient_oracles() {
    std::mt19937_64 rng(20240501);
    std::uniform_int_distribution<std::size_t> dim(2, 32), classes(2, 10);
    std::uniform_real_distribution<double> mdist(0.5, 1.5), temp(1.0, 16.0);
    GradTally ce, ic;
    std::size_t ic_configs = 0, rejected = 0;
    for (std::size_t k = 0; k < kGradConfigs; ++k) {
        const std::size_t d = dim(rng), C = classes(rng);
        oracle::Cols w;
        oracle::Vec m(C);
        for (std::size_t c = 0; c < C; ++c) {
            w.push_back(gaussian(d, rng));
            m[c] = mdist(rng);
        }
        oracle::Vec f = gaussian(d, rng);
        const std::size_t label = k % C;
        const double s = temp(rng);

        ClassifierState st;
        st.weights = to_matrix(w);
        st.boundaries.m = m;
        st.boundaries.frozen.assign(C, 0);
        st.session_of.assign(C, 0);
        const auto g = cross_entropy_grads(st, FeatureVector(f), label, s);
        auto loss = [&] { return oracle::classifier_loss(m, w, f, label, s); };
        const auto dm = oracle::central_differences(m, loss, kFdStep);
        for (std::size_t c = 0; c < C; ++c) ce.add(g.d_boundaries[c], dm[c]);
        for (std::size_t c = 0; c < C; ++c) {
            const auto dw = oracle::central_differences(w[c], loss, kFdStep);
            for (std::size_t r = 0; r < d; ++r) ce.add(g.d_weights(r, c), dw[r]);
        }
    }
    while (ic_configs < kGradConfigs) {
        const std::size_t d = dim(rng), C = classes(rng);
        oracle::Cols p, w;
        oracle::Vec m(C);
        for (std::size_t c = 0; c < C; ++c) {
            w.push_back(gaussian(d, rng));
            auto q = w.back();
            const auto noise = gaussian(d, rng, 0.5);
            for (std::size_t r = 0; r < d; ++r) q[r] += noise[r];
            p.push_back(unit(q));
            m[c] = mdist(rng);
        }
        bool near_kink = false;
        for (std::size_t i = 0; i < C && !near_kink; ++i)
            for (std::size_t j = 0; j < C; ++j) {
                if (i == j) continue;  // identically zero
                const long double t = (1 - m[i]) * oracle::dot(p[i], w[i]) + (m[j] - 1) * oracle::dot(p[i], w[j]);
                near_kink |= std::abs(static_cast<double>(t)) < kKinkMargin;
            }
        if (near_kink) {
            ++rejected;
            continue;
        }
        ++ic_configs;
        const auto g = ic_grads(m, to_matrix(p), to_matrix(w));
        auto loss = [&] { return oracle::ic_loss(m, p, w); };
        const auto dm = oracle::central_differences(m, loss, kFdStep);
        for (std::size_t c = 0; c < C; ++c) ic.add(g.d_boundaries[c], dm[c]);
        for (std::size_t c = 0; c < C; ++c) {
            const auto dw = oracle::central_differences(w[c], loss, kFdStep);
            for (std::size_t r = 0; r < d; ++r) ic.add(g.d_weights(r, c), dw[r]);
        }
    }
    std::ostringstream os;
    os << "cross-entropy " << ce.entries - ce.bad << "/" << ce.entries << " entries within tolerance (worst "
       << ce.worst << "); constraint " << ic.entries - ic.bad << "/" << ic.entries << " (worst " << ic.worst << ", "
       << rejected << " near-kink draws rejected)";
    return {ce.bad == 0 && ic.bad == 0, os.str()};
}

// 3 ---------------------------------------------------------------------

Verdict proposition_sweep() {
    std::mt19937_64 rng(777);
    std::uniform_int_distribution<std::size_t> dim(2, 32), classes(2, 10);
    std::uniform_real_distribution<double> scale(1.0, 2.0), spread(0.0, 0.3), temp(0.5, 16.0), u(-1.0, 1.0);
    std::size_t accepted = 0, drawn = 0, queries = 0, violations = 0;
    double worst_gap = -1.0;
    while (accepted < kSweepConfigs) {
        ++drawn;
        const std::size_t d = dim(rng), C = classes(rng);
        oracle::Cols p;
        for (std::size_t c = 0; c < C; ++c) p.push_back(unit(gaussian(d, rng)));
        const double sc = scale(rng), sp = spread(rng);
        oracle::Vec m(C);
        for (auto& x : m) x = sc * (1.0 + sp * u(rng));
        bool holds = true;  // pairwise separation inequality with w = p
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t j = 0; j < C; ++j)
                if (i != j && (1 - m[i]) * oracle::dot(p[i], p[i]) + (m[j] - 1) * oracle::dot(p[i], p[j]) > 0)
                    holds = false;
        const Matrix pm = to_matrix(p);
        if (verify_proposition1(m, pm, pm, 0.0).satisfied != holds) return {false, "constraint check disagrees with oracle"};
        if (!holds) continue;
        ++accepted;
        const double s = temp(rng);
        for (std::size_t i = 0; i < C; ++i) {
            const auto pr = compare_probabilities(m, pm, FeatureVector(p[i]), i, s);
            ++queries;
            worst_gap = std::max(worst_gap, pr.p_fixed - pr.p_adaptive);
            if (pr.p_adaptive < pr.p_fixed - kProbSlack) ++violations;
        }
    }
    // A configuration that breaks the inequality must be able to lose.
    const Matrix basis = Matrix::identity(2);
    const Vector bad_m{0.9, 1.0};
    const bool bad_rejected = !verify_proposition1(bad_m, basis, basis, 0.0).satisfied;
    const auto bad = compare_probabilities(bad_m, basis, FeatureVector{1.0, 0.0}, 0, 1.0);
    std::ostringstream os;
    os << accepted << " satisfying configurations (" << drawn << " drawn), " << queries << " queries, " << violations
       << " with p_adaptive < p_fixed - 1e-12, max(p_fixed - p_adaptive) = " << worst_gap
       << "; violating m=(0.9,1): p_fixed " << bad.p_fixed << " > p_adaptive " << bad.p_adaptive;
    return {violations == 0 && bad_rejected && bad.p_adaptive < bad.p_fixed, os.str()};
}

// 4 ---------------------------------------------------------------------

Verdict closed_forms() {
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char* what) {
        if (!ok) failed.emplace_back(what);
    };
    std::mt19937_64 rng(4);
    for (int k = 0; k < 100; ++k) {
        const std::size_t C = 1 + k % 10, d = 2 + k % 7;
        oracle::Cols p, w;
        for (std::size_t c = 0; c < C; ++c) {
            p.push_back(unit(gaussian(d, rng)));
            w.push_back(gaussian(d, rng));
        }
        if (ic_loss(Vector(C, 1.0), to_matrix(p), to_matrix(w)) != 0.0) {
            check(false, "IC at M=1");
            break;
        }
    }
    const Matrix basis = Matrix::identity(2);
    check(std::abs(ic_loss(Vector{0.5, 0.5}, basis, basis) - 1.0) <= kClosedFormTol, "IC(0.5,0.5)=1");
    const double e = std::exp(1.0), e12 = std::exp(1.2);
    const auto pr = compare_probabilities(Vector{1.2, 1.0}, basis, FeatureVector{1.0, 0.0}, 0, 1.0);
    check(std::abs(pr.p_fixed - e / (e + 1.0)) <= kClosedFormTol, "p_fixed analytic");
    check(std::abs(pr.p_adaptive - e12 / (e12 + 1.0)) <= kClosedFormTol, "p_adaptive analytic");
    check(std::abs(pr.p_fixed - 0.731059) <= kClosedFormTol, "p_fixed 0.731059");
    check(std::abs(pr.p_adaptive - 0.768525) <= kClosedFormTol, "p_adaptive 0.768525");
    check(std::abs(separation_degree(basis) - 0.5) <= kClosedFormTol, "D_cs orthogonal = 0.5");
    std::ostringstream os;
    os << "IC(M=1)=0 on 100 random configs; IC(0.5,0.5)=" << ic_loss(Vector{0.5, 0.5}, basis, basis)
       << "; p_fixed=" << pr.p_fixed << ", p_adaptive=" << pr.p_adaptive << "; D_cs=" << separation_degree(basis);
    for (const auto& f : failed) os << "; failed: " << f;
    return {failed.empty(), os.str()};
}

// 5 ---------------------------------------------------------------------

Verdict ablation_ordering() {
    const Ablation arms[] = {Ablation::fixed_baseline, Ablation::adb_only, Ablation::adb_ic};
    double acc[3] = {0, 0, 0}, dcs[3] = {0, 0, 0};
    int wins = 0;
    for (std::uint64_t seed = 0; seed < kBenchmarkSeeds; ++seed) {
        const RunConfig rc = reference_config(seed);
        const FscilStream stream = rc.make_stream();
        double last[3];
        for (int a = 0; a < 3; ++a) {
            TrainConfig cfg = rc.train_config();
            cfg.ablation = arms[a];
            const auto r = run_full(stream, cfg, rc.make_extractor(stream.feature_dim));
            last[a] = r.reports.back().top1_accuracy;
            acc[a] += last[a] / kBenchmarkSeeds;
            dcs[a] += r.reports.back().d_cs / kBenchmarkSeeds;
        }
        wins += last[2] > last[0];
    }
    const bool between = acc[1] >= std::min(acc[0], acc[2]) && acc[1] <= std::max(acc[0], acc[2]);
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "final-session top-1 fixed %.4f / adb_only %.4f / adb_ic %.4f (adb_ic wins %d/%zu seeds); "
                  "D_cs %.4f / %.4f / %.4f; adb_only %s the other two (informational)",
                  acc[0], acc[1], acc[2], wins, kBenchmarkSeeds, dcs[0], dcs[1], dcs[2],
                  between ? "lies between" : "does NOT lie between");
    return {acc[2] > acc[0] && dcs[2] > dcs[0], buf};
}

// 6 ---------------------------------------------------------------------

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

Verdict protocol_invariants(const fs::path& tmp) {
    std::size_t bit_checks = 0, bit_bad = 0, mean_checks = 0, mean_bad = 0, resume_checks = 0, resume_bad = 0;
    for (auto kind : {ExtractorKind::identity, ExtractorKind::trainable_linear}) {
        RunConfig rc = reference_config(3);
        rc.extractor = kind;
        rc.train.batch_size = 4;
        const TrainConfig cfg = rc.train_config();
        const FscilStream stream = rc.make_stream();
        const RunResult run = run_full(stream, cfg, rc.make_extractor(stream.feature_dim));
        for (std::size_t t = 1; t < run.checkpoints.size(); ++t) {
            const auto& a = run.checkpoints[t - 1].classifier;
            const auto& b = run.checkpoints[t].classifier;
            for (std::size_t c = 0; c < a.num_classes(); ++c) {
                ++bit_checks;
                bool ok = same_bits(a.boundaries.m[c], b.boundaries.m[c]);
                for (std::size_t r = 0; r < a.dim(); ++r) ok &= same_bits(a.weights(r, c), b.weights(r, c));
                if (!ok) ++bit_bad;
            }
        }
        for (const auto& ck : run.checkpoints) {
            long double sum = 0;
            for (double x : ck.classifier.boundaries.m) sum += x;
            const double mean = static_cast<double>(sum / ck.classifier.boundaries.size());
            const auto grown = expand_mean_init(ck.classifier.boundaries, 3);
            for (std::size_t i = ck.classifier.boundaries.size(); i < grown.size(); ++i) {
                ++mean_checks;
                if (std::abs(grown.m[i] - mean) > kMeanInitTol) ++mean_bad;
            }
        }
        for (std::size_t t = 0; t + 1 < run.checkpoints.size(); ++t) {
            const auto file = tmp / ("ckpt_" + std::string(to_string(kind)) + "_" + std::to_string(t) + ".json");
            save_checkpoint(file.string(), run.checkpoints[t]);
            const RunResult rest = resume(load_checkpoint(file.string()), stream, cfg);
            for (std::size_t k = 0; k < rest.reports.size(); ++k) {
                ++resume_checks;
                if (!(rest.reports[k] == run.reports[t + 1 + k]) || !(rest.checkpoints[k] == run.checkpoints[t + 1 + k]))
                    ++resume_bad;
            }
        }
    }
    std::ostringstream os;
    os << bit_checks - bit_bad << "/" << bit_checks << " old classes bit-identical; " << mean_checks - mean_bad << "/"
       << mean_checks << " mean-init entries within 1e-15; " << resume_checks - resume_bad << "/" << resume_checks
       << " resumed sessions bit-exact";
    return {bit_bad == 0 && mean_bad == 0 && resume_bad == 0, os.str()};
}

// 7 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict determinism(const fs::path& tmp) {
    const fs::path cfg = tmp / "determinism.json";
    std::ofstream(cfg, std::ios::binary) << R"({"seed": 11, "extractor": "trainable_linear"})";
    std::ostringstream sink;
    cli::Overrides a, b;
    a.out_dir = (tmp / "run_a").string();
    b.out_dir = (tmp / "run_b").string();
    if (cli::cmd_run(cfg.string(), a, sink, sink) != 0 || cli::cmd_run(cfg.string(), b, sink, sink) != 0)
        return {false, "cmd_run failed: " + sink.str()};
    std::size_t files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(*a.out_dir)) {
        const auto name = entry.path().filename().string();
        if (name != "results.csv" && name.rfind("simmatrix_", 0) != 0) continue;
        ++files;
        if (slurp(entry.path()) != slurp(fs::path(*b.out_dir) / name)) ++differing;
    }
    return {files == 6 && differing == 0,
            std::to_string(files - differing) + "/" + std::to_string(files) + " files byte-identical"};
}

}  // namespace

int main() {
    const fs::path tmp = fs::path(ADBS_ACCEPTANCE_TMP);
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    criterion(1, "baseline equivalence", 5.0, baseline_equivalence);
    criterion(2, "gradient oracles", 10.0, gradient_oracles);
    criterion(3, "boundary-scaling probability sweep", 5.0, proposition_sweep);
    criterion(4, "closed-form spot checks", 0.0, closed_forms);
    criterion(5, "ablation ordering on the reference benchmark", 60.0, ablation_ordering);
    criterion(6, "protocol invariants", 0.0, [&] { return protocol_invariants(tmp); });
    criterion(7, "determinism", 0.0, [&] { return determinism(tmp); });

    std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
