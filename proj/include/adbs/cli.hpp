#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "adbs/checkpoint.hpp"
#include "adbs/config.hpp"
#include "adbs/metrics.hpp"
#include "adbs/protocol.hpp"
#include "adbs/verify.hpp"

namespace adbs::cli {

// Command-line overrides layered on top of the config file.
struct Overrides {
    std::optional<std::string> out_dir{};
    std::optional<std::uint64_t> seed{};
    std::optional<std::size_t> seeds{};  // ablate: seed count, verify: instance count
    std::optional<double> grad_tolerance{};
    bool inject_violation = false;
};

inline RunConfig resolve(const std::string& config_path, const Overrides& o) {
    RunConfig c = load_config(config_path);
    if (o.out_dir) c.output_dir = *o.out_dir;
    if (o.seed) c.seed = *o.seed;
    if (o.seeds) {
        c.ablation_seeds = *o.seeds;
        c.verify_instances = *o.seeds;
    }
    if (o.grad_tolerance) c.grad_check_tolerance = *o.grad_tolerance;
    c.validate();
    return c;
}

namespace detail {

inline std::filesystem::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return dir;
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    writer(out);
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string percent(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * x);
    return buf;
}

// One row per method with per-session accuracy and the average, the way
// FSCIL results are usually tabulated.
inline void write_accuracy_table(std::ostream& out, const std::vector<std::string>& names,
                                 const std::vector<std::vector<double>>& rows) {
    std::size_t width = 8;
    for (const auto& n : names) width = std::max(width, n.size());
    const std::size_t sessions = rows.empty() ? 0 : rows.front().size();
    out << std::left << std::setw(static_cast<int>(width)) << "method";
    for (std::size_t t = 0; t < sessions; ++t) out << " | " << std::right << std::setw(6) << t;
    out << " | Average\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << std::left << std::setw(static_cast<int>(width)) << names[r];
        double sum = 0.0;
        for (double v : rows[r]) {
            out << " | " << percent(v);
            sum += v;
        }
        out << " | " << percent(sum / static_cast<double>(rows[r].size())) << '\n';
    }
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double std_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace detail

// Full run: results.csv, simmatrix_<t>.csv per session, summary.txt and
// the final checkpoint.json in the output directory.
inline int cmd_run(const std::string& config_path, const Overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const RunConfig cfg = resolve(config_path, o);
        const FscilStream stream = cfg.make_stream();
        const RunResult result = run_full(stream, cfg.train_config(), cfg.make_extractor(stream.feature_dim));
        const auto dir = detail::prepare_dir(cfg.output_dir);

        detail::write_file(dir / "results.csv", [&](std::ostream& f) { write_results_csv(f, result.reports); });
        for (const auto& r : result.reports) {
            detail::write_file(dir / ("simmatrix_" + std::to_string(r.session_index) + ".csv"),
                               [&](std::ostream& f) { write_matrix_csv(f, r.similarity_matrix); });
        }
        std::ostringstream summary;
        std::vector<double> acc, dcs;
        for (const auto& r : result.reports) {
            acc.push_back(r.top1_accuracy);
            dcs.push_back(r.d_cs);
        }
        summary << "Top-1 accuracy per session (%)\n";
        detail::write_accuracy_table(summary, {std::string(to_string(cfg.train.ablation))}, {acc});
        summary << "\nClass separation degree per session:";
        for (double d : dcs) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), " %.4f", d);
            summary << buf;
        }
        summary << '\n';
        detail::write_file(dir / "summary.txt", [&](std::ostream& f) { f << summary.str(); });
        save_checkpoint((dir / "checkpoint.json").string(), result.checkpoints.back());
        out << summary.str();
        return 0;
    });
}

// Runs fixed_baseline, adb_only and adb_ic over seeds seed .. seed+N-1 with
// paired streams and writes ablation.csv.
inline int cmd_ablate(const std::string& config_path, const Overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const RunConfig base_cfg = resolve(config_path, o);
        const Ablation arms[] = {Ablation::fixed_baseline, Ablation::adb_only, Ablation::adb_ic};
        const std::size_t n_seeds = base_cfg.ablation_seeds;

        // [arm][seed] -> reports
        std::vector<std::vector<std::vector<SessionReport>>> runs(3);
        for (std::size_t s = 0; s < n_seeds; ++s) {
            RunConfig cfg = base_cfg;
            cfg.seed = base_cfg.seed + s;
            const FscilStream stream = cfg.make_stream();
            for (std::size_t a = 0; a < 3; ++a) {
                TrainConfig tc = cfg.train_config();
                tc.ablation = arms[a];
                runs[a].push_back(run_full(stream, tc, cfg.make_extractor(stream.feature_dim)).reports);
            }
        }
        const std::size_t sessions = runs[0][0].size();
        const auto dir = detail::prepare_dir(base_cfg.output_dir);

        std::vector<std::string> names;
        std::vector<std::vector<double>> mean_rows;
        std::ostringstream csv;
        csv << "arm,session,n_seeds,top1_mean,top1_std,d_cs_mean,d_cs_std,delta_last_mean,delta_last_std\n";
        for (std::size_t a = 0; a < 3; ++a) {
            std::vector<double> deltas;
            for (std::size_t s = 0; s < n_seeds; ++s) deltas.push_back(delta_last(runs[a][s], runs[0][s]));
            std::vector<double> row;
            for (std::size_t t = 0; t < sessions; ++t) {
                std::vector<double> acc, dcs;
                for (std::size_t s = 0; s < n_seeds; ++s) {
                    acc.push_back(runs[a][s][t].top1_accuracy);
                    dcs.push_back(runs[a][s][t].d_cs);
                }
                row.push_back(detail::mean_of(acc));
                csv << to_string(arms[a]) << ',' << t << ',' << n_seeds << ',' << format_double(detail::mean_of(acc))
                    << ',' << format_double(detail::std_of(acc)) << ',' << format_double(detail::mean_of(dcs)) << ','
                    << format_double(detail::std_of(dcs)) << ',' << format_double(detail::mean_of(deltas)) << ','
                    << format_double(detail::std_of(deltas)) << '\n';
            }
            names.emplace_back(to_string(arms[a]));
            mean_rows.push_back(std::move(row));
        }
        detail::write_file(dir / "ablation.csv", [&](std::ostream& f) { f << csv.str(); });

        std::ostringstream summary;
        summary << "Mean top-1 accuracy per session over " << n_seeds << " seed(s) (%)\n";
        detail::write_accuracy_table(summary, names, mean_rows);
        summary << "\nDelta_last vs fixed_baseline (points):";
        for (std::size_t a = 1; a < 3; ++a) {
            std::vector<double> deltas;
            for (std::size_t s = 0; s < n_seeds; ++s) deltas.push_back(delta_last(runs[a][s], runs[0][s]));
            summary << ' ' << names[a] << ' ' << std::showpos << std::fixed << std::setprecision(2)
                    << 100.0 * detail::mean_of(deltas) << std::noshowpos;
        }
        summary << '\n';
        detail::write_file(dir / "ablation_summary.txt", [&](std::ostream& f) { f << summary.str(); });
        out << summary.str();
        return 0;
    });
}

// Gradient checks for both losses plus the boundary-scaling probability
// sweep. Exit status 0 only if every check passes.
inline int cmd_verify(const std::string& config_path, const Overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const RunConfig cfg = resolve(config_path, o);
        bool ok = true;

        GradCheckSettings g;
        g.configurations = cfg.grad_check_configs;
        g.tolerance = cfg.grad_check_tolerance;
        g.seed = substream_seed(cfg.seed, "gradcheck");
        const auto report_grad = [&](const char* name, const GradCheckOutcome& r) {
            out << (r.passed() ? "PASS " : "FAIL ") << name << ": " << r.configurations << " configurations, "
                << r.entries_checked << " entries, " << r.failures << " failures, worst error " << r.worst_error
                << '\n';
            if (!r.passed()) {
                out << "  worst case: " << r.worst_description << '\n';
                ok = false;
            }
        };
        report_grad("cross-entropy gradients", check_cross_entropy_gradients(g));
        report_grad("inter-class constraint gradients", check_ic_gradients(g));

        SweepSettings s;
        s.instances = cfg.verify_instances;
        s.seed = substream_seed(cfg.seed, "sweep");
        s.inject_violation = o.inject_violation;
        const auto sweep = proposition1_sweep(s);
        out << (sweep.passed() ? "PASS " : "FAIL ") << "boundary-scaling probability sweep: " << sweep.instances
            << " constraint-satisfying instances, " << sweep.unsatisfied << " unsatisfied skipped, "
            << sweep.probability_failures << " failures, max(p_fixed - p_adaptive) = " << sweep.worst_gap << '\n';
        if (!sweep.passed()) {
            out << "  worst instance: " << sweep.worst_instance << '\n';
            ok = false;
        }
        if (sweep.injected) {
            out << "injected violating instance: "
                << (sweep.injected_satisfied ? "accepted by the constraint filter (BUG)"
                                             : "constraint unsatisfied, excluded from the sweep")
                << "; p_fixed = " << sweep.injected_p_fixed << ", p_adaptive = " << sweep.injected_p_adaptive
                << '\n';
        }
        out << (ok ? "all checks passed\n" : "verification FAILED\n");
        return ok ? 0 : 1;
    });
}

// Writes the configured synthetic stream as features.csv.
inline int cmd_gen_data(const std::string& config_path, const Overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const RunConfig cfg = resolve(config_path, o);
        const FscilStream stream = generate_synthetic(cfg.synthetic_spec(), cfg.session_spec());
        const auto dir = detail::prepare_dir(cfg.output_dir);
        const auto path = dir / "features.csv";
        detail::write_file(path, [&](std::ostream& f) { write_feature_csv(f, stream); });
        out << "wrote " << path.string() << " (" << stream.num_sessions() << " sessions, "
            << stream.class_labels.size() << " classes, d=" << stream.feature_dim << ")\n";
        return 0;
    });
}

}  // namespace adbs::cli
