// SPDX-License-Identifier: Apache-2.0
//
// cfura - joint message detection and channel estimation for cell-free uRA
// Copyright (C) 2026 cfura contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "cfura/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "cfura/amp.hpp"
#include "cfura/csv.hpp"
#include "cfura/denoiser.hpp"
#include "cfura/format.hpp"
#include "cfura/parallel.hpp"

#ifndef CFURA_VERSION
#define CFURA_VERSION "0.0.0"
#endif

namespace cfura
{
    namespace fs = std::filesystem;

    std::string to_string(Stage s)
    {
        switch (s)
        {
        case Stage::se:
            return "se";
        case Stage::simulate:
            return "simulate";
        case Stage::roc:
            return "roc";
        case Stage::rates:
            return "rates";
        case Stage::genie:
            return "genie";
        }
        return "unknown";
    }

    namespace
    {
        constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

        std::string utc_now()
        {
            const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            std::tm tm{};
            gmtime_r(&now, &tm);
            char buf[32];
            std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
            return buf;
        }

        void note(const RunOptions &o, const std::string &msg)
        {
            if (!o.quiet)
                std::cerr << "[cfura] " << msg << std::endl;
        }

        std::string join_row(const RVec &v)
        {
            std::string s;
            for (Eigen::Index i = 0; i < v.size(); ++i)
                s += (i ? " " : "") + format_double(v(i));
            return s;
        }

        RVec parse_row(std::istringstream &is, int n)
        {
            RVec v(n);
            for (int i = 0; i < n; ++i)
            {
                std::string tok;
                if (!(is >> tok) || !parse_double(tok, v(i)))
                    throw std::runtime_error("cache: malformed number");
            }
            return v;
        }

        // State evolution cache: diagonals only, which is all the projected recursion produces.
        void save_se(const std::string &path, const SeTrace &se, int U)
        {
            std::ofstream out(path, std::ios::trunc);
            if (!out)
                throw std::runtime_error("cannot write SE cache '" + path + "'");
            const int T = static_cast<int>(se.c_seq.size());
            const bool ons = !se.onsager_seq.empty();
            out << "cfura-se 1\n" << T << ' ' << U << ' ' << se.c_star.dim() << ' ' << (ons ? 1 : 0) << ' '
                << (se.converged ? 1 : 0) << ' ' << se.iterations_to_converge << '\n';
            for (int t = 0; t < T; ++t)
            {
                out << "c " << join_row(se.c_seq[t].diagonal_values()) << '\n';
                out << "p " << format_double(se.predicted_mse[t]) << '\n';
                for (int u = 0; u < U; ++u)
                    out << "m " << join_row(se.mmse_seq[t][u].diagonal().real()) << '\n';
                if (ons)
                    for (int u = 0; u < U; ++u)
                        out << "o " << join_row(se.onsager_seq[t][u].diagonal().real()) << '\n';
            }
            out << "c " << join_row(se.c_star.diagonal_values()) << '\n';
            if (!out)
                throw std::runtime_error("write failed on SE cache '" + path + "'");
        }

        std::optional<SeTrace> load_se(const std::string &path, int U, int F, int T, bool need_onsager)
        {
            std::ifstream in(path);
            if (!in)
                return std::nullopt;
            std::string magic;
            int t_in = 0, u_in = 0, f_in = 0, ons = 0, conv = 0, iters = 0;
            std::getline(in, magic);
            if (magic != "cfura-se 1")
                return std::nullopt;
            in >> t_in >> u_in >> f_in >> ons >> conv >> iters;
            if (t_in != T || u_in != U || f_in != F || (need_onsager && !ons))
                return std::nullopt;
            in >> std::ws;

            SeTrace se;
            se.converged = conv != 0;
            se.iterations_to_converge = iters;
            std::string line;
            auto next = [&](char tag) -> std::istringstream
            {
                if (!std::getline(in, line) || line.size() < 2 || line[0] != tag)
                    throw std::runtime_error("SE cache '" + path + "' is malformed");
                return std::istringstream(line.substr(2));
            };
            for (int t = 0; t < T; ++t)
            {
                auto c = next('c');
                se.c_seq.push_back(EffectiveNoise::diagonal(parse_row(c, F)));
                auto p = next('p');
                se.predicted_mse.push_back(parse_row(p, 1)(0));
                std::vector<CMat> m(U), o;
                for (int u = 0; u < U; ++u)
                {
                    auto s = next('m');
                    m[u] = parse_row(s, F).cast<cplx>().asDiagonal();
                }
                se.mmse_seq.push_back(std::move(m));
                if (ons)
                {
                    o.resize(U);
                    for (int u = 0; u < U; ++u)
                    {
                        auto s = next('o');
                        o[u] = parse_row(s, F).cast<cplx>().asDiagonal();
                    }
                    se.onsager_seq.push_back(std::move(o));
                }
            }
            auto c = next('c');
            se.c_star = EffectiveNoise::diagonal(parse_row(c, F));
            return se;
        }

        void save_tables(const std::string &path, const DlTables &t)
        {
            CsvWriter w(path, {"location", "ru", "mean_re", "mean_im", "var", "z", "mean_se", "var_se", "z_se"});
            for (Eigen::Index u = 0; u < t.mean.rows(); ++u)
                for (Eigen::Index b = 0; b < t.mean.cols(); ++b)
                    w.row({csv_cell(static_cast<long long>(u)), csv_cell(static_cast<long long>(b)),
                           csv_cell(t.mean(u, b).real()), csv_cell(t.mean(u, b).imag()), csv_cell(t.var(u, b)),
                           csv_cell(t.z(u, b)), csv_cell(t.mean_std_error(u, b)), csv_cell(t.var_std_error(u, b)),
                           csv_cell(t.z_std_error(u, b))});
            w.close();
        }

        std::optional<DlTables> load_tables(const std::string &path, int U, int B)
        {
            if (!fs::exists(path))
                return std::nullopt;
            const CsvTable tab = read_csv(path);
            const int cu = tab.column("location"), cb = tab.column("ru"), cr = tab.column("mean_re"),
                      ci = tab.column("mean_im"), cv = tab.column("var"), cz = tab.column("z"),
                      cme = tab.column("mean_se"), cve = tab.column("var_se"), cze = tab.column("z_se");
            if (cu < 0 || cb < 0 || cr < 0 || ci < 0 || cv < 0 || cz < 0 || cme < 0 || cve < 0 || cze < 0 ||
                tab.rows.size() != static_cast<std::size_t>(U) * B)
                return std::nullopt;
            DlTables t{CMat::Zero(U, B), RMat::Zero(U, B), RMat::Zero(U, B),
                       RMat::Zero(U, B), RMat::Zero(U, B), RMat::Zero(U, B)};
            for (const auto &r : tab.rows)
            {
                const int u = std::stoi(r[cu]);
                const int b = std::stoi(r[cb]);
                double re = 0, im = 0, v = 0, z = 0, me = 0, ve = 0, ze = 0;
                if (u < 0 || u >= U || b < 0 || b >= B || !parse_double(r[cr], re) || !parse_double(r[ci], im) ||
                    !parse_double(r[cv], v) || !parse_double(r[cz], z) || !parse_double(r[cme], me) ||
                    !parse_double(r[cve], ve) || !parse_double(r[cze], ze))
                    return std::nullopt;
                t.mean(u, b) = cplx(re, im);
                t.var(u, b) = v;
                t.z(u, b) = z;
                t.mean_std_error(u, b) = me;
                t.var_std_error(u, b) = ve;
                t.z_std_error(u, b) = ze;
            }
            return t;
        }

        struct TrialOut
        {
            std::vector<double> mse;
            std::vector<long> active, missed, idle, false_alarms;
            ConditionalErrorReport estimation;
            std::vector<GenieLocationSummary> genie;
            std::vector<SampleStats> mu;     // per RU
            std::vector<double> mu_spread;   // per RU
            std::vector<std::vector<double>> llr_active, llr_idle;
        };

        double fraction(long num, long den)
        {
            return den > 0 ? static_cast<double>(num) / den : kNaN;
        }

        bool needs_amp(Stage s)
        {
            return s == Stage::simulate || s == Stage::roc;
        }

        bool needs_trials(Stage s)
        {
            return needs_amp(s) || s == Stage::genie;
        }

        bool needs_thresholds(Stage s)
        {
            return s != Stage::se && s != Stage::genie;
        }
    }

    double ExperimentResult::se_relative_error(int t) const
    {
        const int T = static_cast<int>(se.predicted_mse.size());
        require(t >= 1 && t <= T + 1, "se_relative_error: t out of range");
        require(!mse.empty(), "se_relative_error: no trials recorded");
        const double pred = t <= T ? se.predicted_mse[t - 1]
                                   : se.c_star.matrix().trace().real() - se.c_star.dim() * sigma_w2;
        double emp = 0.0;
        for (const auto &m : mse)
            emp += m.at(t - 1);
        emp /= static_cast<double>(mse.size());
        return std::abs(emp - pred) / pred;
    }

    std::string se_cache_key(const ExperimentConfig &c)
    {
        ExperimentConfig k;
        k.system = c.system;
        k.geometry = c.geometry;
        k.onsager = c.onsager;
        std::string text = resolved_config(k);
        // Only the [system] and [geometry] sections and the Onsager mode matter.
        text = text.substr(0, text.find("[experiment]")) + "onsager = " + to_string(c.onsager) + "\n";
        return sha1_hex("se\n" + text);
    }

    void write_manifest(const std::string &path, const RunManifest &m)
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open '" + path + "' for writing");
        out << "schema_version = " << m.schema_version << "\n"
            << "software = " << m.software << "\n"
            << "config_hash = " << m.config_hash << "\n"
            << "master_seed = " << m.master_seed << "\n"
            << "started_utc = " << m.started_utc << "\n"
            << "wall_seconds = " << format_double(m.wall_seconds) << "\n"
            << "rate_units = bits/symbol (log2; the natural-log rates divided by ln 2)\n";
        for (const auto &[k, v] : m.stream_seeds)
            out << "stream." << k << " = " << v << "\n";
        for (const auto &f : m.files)
            out << "file = " << f << "\n";
        for (const auto &[k, v] : m.summary)
            out << "summary." << k << " = " << v << "\n";
        out << "\n# resolved configuration\n" << m.config_text;
        if (!out)
            throw std::runtime_error("write failed on '" + path + "'");
    }

    ExperimentResult run_experiment(const ExperimentConfig &config, Stage stage, const RunOptions &options)
    {
        config.validate();
        const auto t0 = std::chrono::steady_clock::now();
        const int threads = std::max(1, options.threads);

        ExperimentResult res;
        res.config = config;
        res.stage = stage;
        const SystemConfig &sys = config.system;
        const int U = sys.U, B = sys.B, M = sys.M, T = sys.T, F = sys.F();
        res.geometry = build_geometry(config.geometry);
        res.priors = location_priors(sys, res.geometry);
        res.sigma_w2 = sys.noise_variance();

        std::vector<double> lambda = sys.lambda, load(U);
        for (int u = 0; u < U; ++u)
            load[u] = sys.load(u);

        const RngStream root(sys.seed);
        const RngStream se_stream = root.child(streams::state_evolution);
        const RngStream est_stream = root.child("estimation");
        const RngStream dl_stream = root.child("downlink");

        RunManifest &man = res.manifest;
        man.schema_version = kCsvSchemaVersion;
        man.software = std::string("cfura ") + CFURA_VERSION;
        man.config_hash = config_hash(config);
        man.config_text = resolved_config(config);
        man.master_seed = sys.seed;
        man.started_utc = utc_now();
        man.stream_seeds = {{"se", se_stream.seed()}, {"estimation", est_stream.seed()}, {"downlink", dl_stream.seed()}};
        man.summary.push_back({"stage", to_string(stage)});
        man.summary.push_back({"onsager_mode", to_string(config.onsager)});
        man.summary.push_back({"noise_mode", to_string(config.noise)});

        const bool write = options.write_files;
        if (write)
            fs::create_directories(config.out);
        if (!options.cache_dir.empty())
            fs::create_directories(options.cache_dir);
        auto out_path = [&](const std::string &name)
        {
            man.files.push_back(name);
            return (fs::path(config.out) / name).string();
        };

        // State evolution, cached by the fields it depends on.
        const bool need_onsager = config.onsager == OnsagerMode::se;
        const std::string se_key = se_cache_key(config);
        std::optional<SeTrace> cached;
        const std::string se_cache =
            options.cache_dir.empty() ? std::string() : (fs::path(options.cache_dir) / ("se_" + se_key + ".txt")).string();
        if (!se_cache.empty())
            cached = load_se(se_cache, U, F, T, need_onsager);
        if (cached)
        {
            res.se = std::move(*cached);
            note(options, "state evolution loaded from cache");
        }
        else
        {
            note(options, "state evolution");
            SeOptions so;
            so.antennas = M;
            so.project = true;
            so.compute_onsager = need_onsager;
            so.threads = threads;
            res.se = se_recursion(res.priors, res.sigma_w2, T, sys.mc_se, se_stream, so);
            if (!se_cache.empty())
                save_se(se_cache, res.se, U);
        }
        man.summary.push_back({"se_cache_key", se_key});
        man.summary.push_back({"se_converged", res.se.converged ? "true" : "false"});
        man.summary.push_back({"se_iterations_to_converge", std::to_string(res.se.iterations_to_converge)});

        if (write)
        {
            std::vector<std::string> cols{"t"};
            for (int b = 0; b < B; ++b)
                cols.push_back("tau_" + std::to_string(b + 1));
            for (int u = 0; u < U; ++u)
                cols.push_back("mmse_" + std::to_string(u + 1));
            CsvWriter w(out_path("se_trace.csv"), cols);
            for (int t = 0; t < T; ++t)
            {
                std::vector<std::string> row{csv_cell(t + 1)};
                const RVec tau = res.se.c_seq[t].per_ru_values(M);
                for (int b = 0; b < B; ++b)
                    row.push_back(csv_cell(tau(b)));
                for (int u = 0; u < U; ++u)
                    row.push_back(csv_cell(res.se.mmse_seq[t][u].trace().real()));
                w.row(row);
            }
            w.close();
            std::ofstream g(out_path("geometry.txt"));
            if (!g)
                throw std::runtime_error("cannot write geometry.txt in '" + config.out + "'");
            write_geometry(g, res.geometry);
        }

        const EffectiveNoise &c_final = res.se.c_seq[T - 1];

        if (needs_thresholds(stage))
        {
            note(options, "threshold calibration");
            res.thresholds.resize(U);
            res.theory.resize(U);
            parallel_for(U, threads,
                         [&](int u)
                         {
                             res.thresholds(u) = calibrate_threshold(res.priors[u].prior, c_final, config.detection);
                             res.theory[u] = md_fa_probabilities(res.priors[u].prior, c_final, res.thresholds(u));
                         });
        }

        if ((stage == Stage::simulate || stage == Stage::genie) && config.genie)
        {
            res.c_star.resize(B);
            for (int b = 0; b < B; ++b)
                res.c_star[b] = genie_asymptotic_fixed_point(res.geometry, lambda, load, res.sigma_w2, b);
        }

        if (needs_trials(stage))
        {
            const bool amp = needs_amp(stage);
            const bool keep_llr = amp;
            const bool genie = config.genie && (stage == Stage::simulate || stage == Stage::genie);
            AmpOptions ao;
            ao.onsager = config.onsager;
            ao.noise = config.noise;
            ao.antennas = M;
            ao.se_onsager = need_onsager ? &res.se.onsager_seq : nullptr;
            ao.keep_q_history = false;

            std::vector<TrialOut> outs(config.trials);
            parallel_for(config.trials, threads,
                         [&](int k)
                         {
                             try
                             {
                                 TrialOut &o = outs[k];
                                 const Scene scene = sample_scene(sys, res.geometry, root.child(streams::trial, k));
                                 if (amp)
                                 {
                                     const AmpTrace tr = amp_run(scene, res.priors, sys, res.se.c_seq, ao);
                                     o.mse = tr.mse;
                                     o.mse.push_back(tr.mse_final);
                                     const EffectiveNoise &cn =
                                         config.noise == NoiseMode::online ? tr.noise_used.back() : c_final;
                                     const DetectionReport rep =
                                         detect(tr.r, res.priors, cn, res.thresholds, &scene.activity);
                                     o.active = rep.active;
                                     o.missed = rep.missed;
                                     o.idle = rep.idle;
                                     o.false_alarms = rep.false_alarms;
                                     o.estimation = conditional_error_stats(scene, tr, rep, config.moment_order);
                                     if (keep_llr)
                                     {
                                         o.llr_active.resize(U);
                                         o.llr_idle.resize(U);
                                         for (int u = 0; u < U; ++u)
                                         {
                                             const RVec llr = BgDenoiser(res.priors[u].prior, cn)
                                                                  .log_likelihood_ratios(tr.r[u], false);
                                             for (Eigen::Index n = 0; n < llr.size(); ++n)
                                                 (scene.activity[u][n] ? o.llr_active[u] : o.llr_idle[u])
                                                     .push_back(llr(n));
                                         }
                                     }
                                 }
                                 if (genie)
                                 {
                                     const GenieResult g = genie_mmse_estimate(scene, res.geometry, res.sigma_w2, M);
                                     o.genie = summarize_genie(g, U, res.c_star);
                                     o.mu.resize(B);
                                     o.mu_spread.assign(B, kNaN);
                                     for (int b = 0; b < B && !g.rus.empty(); ++b)
                                     {
                                         for (Eigen::Index i = 0; i < g.rus[b].mu.size(); ++i)
                                             o.mu[b].add(g.rus[b].mu(i));
                                         const auto m = o.mu[b].mean();
                                         const auto se = o.mu[b].std_error();
                                         if (m && se)
                                             o.mu_spread[b] = *se * std::sqrt(static_cast<double>(o.mu[b].count)) / *m;
                                     }
                                 }
                             }
                             catch (const std::exception &e)
                             {
                                 std::cerr << "[cfura] trial " << k << " failed: " << e.what() << std::endl;
                                 throw;
                             }
                         });
            note(options, "trials complete");

            // Reductions in trial order.
            for (int k = 0; k < config.trials && k < 1000; ++k)
                man.stream_seeds.push_back({"trial." + std::to_string(k), root.child(streams::trial, k).seed()});
            if (amp)
            {
                res.active.assign(U, 0);
                res.missed.assign(U, 0);
                res.idle.assign(U, 0);
                res.false_alarms.assign(U, 0);
                res.estimation.p = config.moment_order;
                res.estimation.dim = F;
                res.estimation.locations.resize(U);
                for (const TrialOut &o : outs)
                {
                    res.mse.push_back(o.mse);
                    for (int u = 0; u < U; ++u)
                    {
                        res.active[u] += o.active[u];
                        res.missed[u] += o.missed[u];
                        res.idle[u] += o.idle[u];
                        res.false_alarms[u] += o.false_alarms[u];
                        res.estimation.locations[u].detected.merge(o.estimation.locations[u].detected);
                        res.estimation.locations[u].false_alarm.merge(o.estimation.locations[u].false_alarm);
                    }
                }
            }
            if (genie)
            {
                res.genie.resize(U);
                res.genie_mu.resize(B);
                res.genie_mu_spread.assign(B, 0.0);
                std::vector<int> spread_n(B, 0);
                for (const TrialOut &o : outs)
                {
                    if (o.genie.empty())
                        continue;
                    for (int u = 0; u < U; ++u)
                    {
                        res.genie[u].squared_error.merge(o.genie[u].squared_error);
                        res.genie[u].mse.merge(o.genie[u].mse);
                        res.genie[u].mu_ratio.merge(o.genie[u].mu_ratio);
                    }
                    for (int b = 0; b < B; ++b)
                    {
                        res.genie_mu[b].merge(o.mu[b]);
                        if (!std::isnan(o.mu_spread[b]))
                        {
                            res.genie_mu_spread[b] += o.mu_spread[b];
                            ++spread_n[b];
                        }
                    }
                }
                for (int b = 0; b < B; ++b)
                    res.genie_mu_spread[b] = spread_n[b] ? res.genie_mu_spread[b] / spread_n[b] : kNaN;
            }

            if (amp && write)
            {
                CsvWriter w(out_path("mse_trace.csv"), {"trial", "t", "mse_empirical", "mse_se_predicted"});
                const double pred_final = res.se.c_star.matrix().trace().real() - F * res.sigma_w2;
                for (int k = 0; k < config.trials; ++k)
                    for (int t = 1; t <= T + 1; ++t)
                        w.row({csv_cell(k), csv_cell(t), csv_cell(res.mse[k][t - 1]),
                               csv_cell(t <= T ? res.se.predicted_mse[t - 1] : pred_final)});
                w.close();
            }

            if (amp)
            {
                // Detection sweep on the pooled prior-free log-likelihood ratios.
                std::vector<RocPoint> roc;
                for (int u = 0; u < U; ++u)
                {
                    std::vector<double> la, li;
                    for (const TrialOut &o : outs)
                    {
                        la.insert(la.end(), o.llr_active[u].begin(), o.llr_active[u].end());
                        li.insert(li.end(), o.llr_idle[u].begin(), o.llr_idle[u].end());
                    }
                    std::sort(la.begin(), la.end());
                    std::sort(li.begin(), li.end());
                    const DetectorSpec base = build_detector(res.priors[u].prior, c_final, 0.0);
                    const double lo = 0.1 * base.d_h0.sum();
                    const double hi = 3.0 * base.d_h1.sum();
                    std::vector<double> nus;
                    for (int i = 0; i < config.roc_points; ++i)
                    {
                        const double gamma = lo * std::pow(hi / lo, static_cast<double>(i) / (config.roc_points - 1));
                        nus.push_back(base.log_det_ratio - gamma);
                    }
                    nus.push_back(res.thresholds(u));
                    std::sort(nus.begin(), nus.end());
                    for (double nu : nus)
                    {
                        DetectorSpec spec = base;
                        spec.nu_log = nu;
                        spec.gamma = base.log_det_ratio - nu;
                        const ErrorProbabilities p = md_fa_probabilities(spec);
                        const long missed = static_cast<long>(la.end() - std::lower_bound(la.begin(), la.end(), nu));
                        const long fa = static_cast<long>(std::lower_bound(li.begin(), li.end(), nu) - li.begin());
                        roc.push_back({u, nu, p.p_md, p.p_fa, fraction(missed, static_cast<long>(la.size())),
                                       fraction(fa, static_cast<long>(li.size()))});
                    }
                }
                res.roc = std::move(roc);
                if (write)
                {
                    CsvWriter w(out_path("roc.csv"), {"location", "nu_log", "p_md_theory", "p_fa_theory",
                                                      "p_md_empirical", "p_fa_empirical"});
                    for (const RocPoint &r : res.roc)
                        w.row({csv_cell(r.location), csv_cell(r.nu_log), csv_cell(r.p_md_theory),
                               csv_cell(r.p_fa_theory), csv_cell(r.p_md_empirical), csv_cell(r.p_fa_empirical)});
                    w.close();
                    CsvWriter d(out_path("detection.csv"),
                                {"location", "nu_log", "p_md_theory", "p_fa_theory", "n_active", "n_missed", "n_idle",
                                 "n_false_alarm"});
                    for (int u = 0; u < U; ++u)
                        d.row({csv_cell(u), csv_cell(res.thresholds(u)), csv_cell(res.theory[u].p_md),
                               csv_cell(res.theory[u].p_fa), csv_cell(res.active[u]), csv_cell(res.missed[u]),
                               csv_cell(res.idle[u]), csv_cell(res.false_alarms[u])});
                    d.close();
                }
                long na = 0, nm = 0, ni = 0, nf = 0;
                for (int u = 0; u < U; ++u)
                {
                    na += res.active[u];
                    nm += res.missed[u];
                    ni += res.idle[u];
                    nf += res.false_alarms[u];
                }
                man.summary.push_back({"p_md_empirical_pooled", csv_cell(fraction(nm, na))});
                man.summary.push_back({"p_fa_empirical_pooled", csv_cell(fraction(nf, ni))});
            }
        }

        if (stage == Stage::simulate)
        {
            note(options, "conditional estimation theory");
            parallel_for(U, threads,
                         [&](int u)
                         {
                             res.estimation.locations[u].theory = conditional_error_theory(
                                 res.priors[u].prior, c_final, res.thresholds(u), config.moment_order, sys.mc_cond,
                                 est_stream.child(streams::conditional, u));
                         });
            if (write)
            {
                CsvWriter w(out_path("estimation.csv"),
                            {"location", "n_detected", "mse_Ad_empirical", "mse_Ad_theory", "mse_genie_empirical",
                             "mse_genie_asymptotic", "mse_Ad_empirical_se", "mse_Ad_theory_se", "n_false_alarm",
                             "fa_moment_empirical", "fa_moment_theory", "mse_genie_formula"});
                const double scale = 1.0 / F;
                auto scaled = [&](std::optional<double> v) -> std::optional<double>
                {
                    if (v)
                        return *v * scale;
                    return std::nullopt;
                };
                for (int u = 0; u < U; ++u)
                {
                    const LocationErrorStats &l = res.estimation.locations[u];
                    const bool g = !res.genie.empty();
                    w.row({csv_cell(u), csv_cell(l.detected.count), csv_cell(scaled(l.detected.mean())),
                           csv_cell(scaled(l.theory.detected_moment)),
                           csv_cell(g ? res.genie[u].squared_error.mean() : std::nullopt),
                           csv_cell(g ? std::optional<double>(genie_asymptotic_mse(res.geometry, res.c_star, u))
                                      : std::nullopt),
                           csv_cell(scaled(l.detected.std_error())),
                           csv_cell(l.theory.detected_moment ? std::optional<double>(l.theory.detected_std_error * scale)
                                                             : std::nullopt),
                           csv_cell(l.false_alarm.count), csv_cell(l.false_alarm.mean()),
                           csv_cell(l.theory.false_alarm_moment), csv_cell(g ? res.genie[u].mse.mean() : std::nullopt)});
                }
                w.close();
            }
        }

        if ((stage == Stage::simulate || stage == Stage::genie) && config.genie && write)
        {
            CsvWriter w(out_path("genie.csv"),
                        {"ru", "c_star", "inv_c_star", "mu_mean", "mu_std_error", "mu_relative_spread"});
            for (int b = 0; b < B; ++b)
                w.row({csv_cell(b), csv_cell(res.c_star[b]), csv_cell(1.0 / res.c_star[b]),
                       csv_cell(res.genie_mu.empty() ? std::nullopt : res.genie_mu[b].mean()),
                       csv_cell(res.genie_mu.empty() ? std::nullopt : res.genie_mu[b].std_error()),
                       csv_cell(res.genie_mu_spread.empty() ? kNaN : res.genie_mu_spread[b])});
            w.close();
        }

        if (stage == Stage::simulate || stage == Stage::rates)
        {
            res.clusters = form_clusters(res.geometry, config.Q);
            std::string key_text = se_key + "\ndl2\n" + std::to_string(sys.mc_cond) + "\n" + to_string(config.detection);
            for (int u = 0; u < U; ++u)
                key_text += "\n" + format_double(res.thresholds(u));
            const std::string dl_cache = options.cache_dir.empty()
                                             ? std::string()
                                             : (fs::path(options.cache_dir) / ("dl_" + sha1_hex(key_text) + ".csv")).string();
            std::optional<DlTables> tables;
            if (!dl_cache.empty())
                tables = load_tables(dl_cache, U, B);
            if (!tables)
            {
                note(options, "downlink moment tables");
                try
                {
                    tables = dl_tables(res.priors, c_final, res.thresholds, M, sys.mc_cond, dl_stream, threads);
                }
                catch (const InsufficientSamples &)
                {
                    // simulate reports the downlink as unavailable, rates fails
                    if (stage == Stage::rates)
                        throw;
                    man.summary.push_back({"downlink", "insufficient_samples"});
                }
                if (tables && !dl_cache.empty())
                    save_tables(dl_cache, *tables);
            }
            if (tables)
            {
                const double rho = dl_power_normalization(tables->z, lambda, load, res.clusters.coverage, sys.L);
                RateInputs in;
                in.L = sys.L;
                in.antennas = M;
                in.sigma_w2 = res.sigma_w2;
                in.lambda = lambda;
                in.alpha = load;
                in.genie_variance = config.genie_variance;
                res.rates = uatf_rates(res.geometry, res.clusters, *tables, rho, in);
                res.cdf_uatf = rate_cdf(res.rates.uatf, lambda, load);
                res.cdf_genie = rate_cdf(res.rates.genie, lambda, load);
                man.summary.push_back({"rho_dl", csv_cell(rho)});
                man.summary.push_back({"median_rate_uatf_bits", csv_cell(cdf_median(res.cdf_uatf))});
                man.summary.push_back({"median_rate_genie_bits", csv_cell(cdf_median(res.cdf_genie))});
                if (write)
                {
                    save_tables(out_path("dl_moments.csv"), *tables);
                    std::vector<double> weight(U);
                    for (const RateCdfEntry &e : res.cdf_uatf)
                        weight[e.location] = e.weight;
                    CsvWriter w(out_path("rates_cdf.csv"),
                                {"location", "rate_uatf_bits", "rate_genie_bits", "cdf_weight", "rate_uatf_se_bits"});
                    for (int u = 0; u < U; ++u)
                        w.row({csv_cell(u), csv_cell(res.rates.uatf(u)), csv_cell(res.rates.genie(u)), csv_cell(weight[u]),
                               csv_cell(res.rates.uatf_std_error.size() == U ? res.rates.uatf_std_error(u) : kNaN)});
                    w.close();
                }
            }
        }

        man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (write)
        {
            const std::string path = out_path("manifest.txt");
            write_manifest(path, man);
        }
        return res;
    }
}
