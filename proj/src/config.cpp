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

#include "cfura/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/sha.h>

#include "cfura/format.hpp"

namespace cfura
{
    namespace
    {
        namespace pt = boost::property_tree;

        std::string trim(std::string s)
        {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        }

        double to_double(const std::string &key, const std::string &v)
        {
            double out = 0.0;
            if (!parse_double(v, out) || !std::isfinite(out))
                throw ConfigError("config: " + key + " is not a number: '" + v + "'");
            return out;
        }

        long long to_int(const std::string &key, const std::string &v)
        {
            const std::string t = trim(v);
            long long out = 0;
            auto res = std::from_chars(t.data(), t.data() + t.size(), out);
            if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
                throw ConfigError("config: " + key + " is not an integer: '" + v + "'");
            return out;
        }

        std::uint64_t to_seed(const std::string &key, const std::string &v)
        {
            const std::string t = trim(v);
            std::uint64_t out = 0;
            auto res = std::from_chars(t.data(), t.data() + t.size(), out);
            if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
                throw ConfigError("config: " + key + " is not an unsigned integer: '" + v + "'");
            return out;
        }

        bool to_bool(const std::string &key, const std::string &v)
        {
            const std::string t = trim(v);
            if (t == "true" || t == "1" || t == "yes")
                return true;
            if (t == "false" || t == "0" || t == "no")
                return false;
            throw ConfigError("config: " + key + " must be true or false");
        }

        std::vector<double> to_list(const std::string &key, const std::string &v)
        {
            std::vector<double> out;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ','))
                out.push_back(to_double(key, item));
            if (out.empty())
                throw ConfigError("config: " + key + " is empty");
            return out;
        }

        std::vector<double> cycle(const std::vector<double> &v, int n)
        {
            std::vector<double> out(n);
            for (int i = 0; i < n; ++i)
                out[i] = v[i % v.size()];
            return out;
        }

        double from_db(double db)
        {
            return std::pow(10.0, db / 10.0);
        }

        std::string join(const std::vector<double> &v)
        {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i)
                s += (i ? "," : "") + format_double(v[i]);
            return s;
        }

        const std::set<std::string> kKnown = {
            "system.L", "system.M", "system.T", "system.seed", "system.snr", "system.snr_db", "system.N",
            "system.alpha", "system.lambda", "system.mc_se", "system.mc_cond", "geometry.kind",
            "geometry.crosstalk", "geometry.side", "geometry.d0", "geometry.gamma", "geometry.snr_rx",
            "geometry.snr_rx_db", "experiment.trials", "experiment.detection", "experiment.target_fa",
            "experiment.Q", "experiment.out", "experiment.onsager", "experiment.noise", "experiment.moment_order",
            "experiment.roc_points", "experiment.genie", "experiment.genie_variance"};
    }

    LsfcProfile build_geometry(const GeometryConfig &g)
    {
        if (g.kind == GeometryConfig::Kind::wyner)
            return build_wyner_geometry(g.crosstalk);
        return build_hex_geometry(g.side, g.d0, g.gamma);
    }

    void ExperimentConfig::validate() const
    {
        system.validate();
        require(trials >= 1, "config: trials must be at least 1");
        require(Q >= 1 && Q <= system.B, "config: Q must lie in [1, B]");
        require(moment_order >= 2 && moment_order % 2 == 0, "config: moment_order must be a positive even integer");
        require(roc_points >= 2, "config: roc_points must be at least 2");
        if (detection.kind == ThresholdMode::Kind::target_fa)
            require(detection.target > 0.0 && detection.target < 1.0, "config: target_fa must lie in (0, 1)");
        if (geometry.kind == GeometryConfig::Kind::hex)
            require(geometry.snr_rx > 0.0, "config: snr_rx must be positive");
    }

    ExperimentConfig parse_config(const std::string &text)
    {
        pt::ptree tree;
        try
        {
            std::istringstream is(text);
            pt::read_ini(is, tree);
        }
        catch (const pt::ini_parser_error &e)
        {
            throw ConfigError(std::string("config: ") + e.what());
        }

        std::map<std::string, std::string> kv;
        for (const auto &[section, body] : tree)
        {
            if (body.empty() && !body.data().empty())
                throw ConfigError("config: key '" + section + "' must sit inside a section");
            for (const auto &[key, value] : body)
            {
                const std::string full = section + "." + key;
                if (!kKnown.count(full))
                    throw ConfigError("config: unknown key '" + full + "'");
                kv[full] = trim(value.data());
            }
        }
        auto has = [&](const char *k) { return kv.count(k) > 0; };
        auto get = [&](const char *k) { return kv.at(k); };

        ExperimentConfig cfg;
        try
        {
            GeometryConfig &geo = cfg.geometry;
            if (has("geometry.kind"))
            {
                const std::string k = get("geometry.kind");
                if (k == "wyner")
                    geo.kind = GeometryConfig::Kind::wyner;
                else if (k == "hex")
                    geo.kind = GeometryConfig::Kind::hex;
                else
                    throw ConfigError("config: geometry.kind must be wyner or hex");
            }
            if (has("geometry.crosstalk"))
                geo.crosstalk = to_double("geometry.crosstalk", get("geometry.crosstalk"));
            if (has("geometry.side"))
                geo.side = to_double("geometry.side", get("geometry.side"));
            if (has("geometry.d0"))
                geo.d0 = to_double("geometry.d0", get("geometry.d0"));
            if (has("geometry.gamma"))
                geo.gamma = to_double("geometry.gamma", get("geometry.gamma"));
            if (has("geometry.snr_rx") && has("geometry.snr_rx_db"))
                throw ConfigError("config: give either snr_rx or snr_rx_db");
            if (has("geometry.snr_rx"))
                geo.snr_rx = to_double("geometry.snr_rx", get("geometry.snr_rx"));
            if (has("geometry.snr_rx_db"))
                geo.snr_rx = from_db(to_double("geometry.snr_rx_db", get("geometry.snr_rx_db")));

            const LsfcProfile g = build_geometry(geo);
            SystemConfig &s = cfg.system;
            s.U = g.U();
            s.B = g.B();
            if (has("system.L"))
                s.L = static_cast<int>(to_int("system.L", get("system.L")));
            if (has("system.M"))
                s.M = static_cast<int>(to_int("system.M", get("system.M")));
            if (has("system.T"))
                s.T = static_cast<int>(to_int("system.T", get("system.T")));
            if (has("system.seed"))
                s.seed = to_seed("system.seed", get("system.seed"));
            if (has("system.mc_se"))
                s.mc_se = static_cast<int>(to_int("system.mc_se", get("system.mc_se")));
            if (has("system.mc_cond"))
                s.mc_cond = static_cast<int>(to_int("system.mc_cond", get("system.mc_cond")));
            if (s.L < 1)
                throw ConfigError("config: L must be positive");

            if (has("system.N") == has("system.alpha"))
                throw ConfigError("config: give exactly one of system.N and system.alpha");
            if (has("system.N"))
            {
                std::vector<double> n = cycle(to_list("system.N", get("system.N")), s.U);
                s.alpha.resize(s.U);
                for (int u = 0; u < s.U; ++u)
                    s.alpha[u] = n[u] / s.L;
            }
            else
                s.alpha = cycle(to_list("system.alpha", get("system.alpha")), s.U);
            if (!has("system.lambda"))
                throw ConfigError("config: system.lambda is required");
            s.lambda = cycle(to_list("system.lambda", get("system.lambda")), s.U);

            if (geo.kind == GeometryConfig::Kind::hex)
            {
                if (has("system.snr") || has("system.snr_db"))
                    throw ConfigError("config: the hex layout derives snr from geometry.snr_rx");
                s.snr = calibrate_snr(geo.snr_rx, g);
            }
            else
            {
                if (has("system.snr") == has("system.snr_db"))
                    throw ConfigError("config: give exactly one of system.snr and system.snr_db");
                s.snr = has("system.snr") ? to_double("system.snr", get("system.snr"))
                                          : from_db(to_double("system.snr_db", get("system.snr_db")));
            }

            if (has("experiment.trials"))
                cfg.trials = static_cast<int>(to_int("experiment.trials", get("experiment.trials")));
            if (has("experiment.detection"))
            {
                const std::string d = get("experiment.detection");
                if (d == "equal_error")
                    cfg.detection = ThresholdMode::equal_error();
                else if (d == "target_fa")
                {
                    if (!has("experiment.target_fa"))
                        throw ConfigError("config: detection = target_fa needs experiment.target_fa");
                    cfg.detection = ThresholdMode::target_fa(to_double("experiment.target_fa", get("experiment.target_fa")));
                }
                else
                    throw ConfigError("config: experiment.detection must be equal_error or target_fa");
            }
            if (has("experiment.Q"))
                cfg.Q = static_cast<int>(to_int("experiment.Q", get("experiment.Q")));
            if (has("experiment.out"))
                cfg.out = get("experiment.out");
            if (has("experiment.onsager"))
                cfg.onsager = onsager_mode_from_string(get("experiment.onsager"));
            if (has("experiment.noise"))
                cfg.noise = noise_mode_from_string(get("experiment.noise"));
            if (has("experiment.moment_order"))
                cfg.moment_order = static_cast<int>(to_int("experiment.moment_order", get("experiment.moment_order")));
            if (has("experiment.roc_points"))
                cfg.roc_points = static_cast<int>(to_int("experiment.roc_points", get("experiment.roc_points")));
            if (has("experiment.genie"))
                cfg.genie = to_bool("experiment.genie", get("experiment.genie"));
            if (has("experiment.genie_variance"))
            {
                const std::string v = get("experiment.genie_variance");
                if (v == "exact")
                    cfg.genie_variance = GenieVariance::exact;
                else if (v == "as_printed")
                    cfg.genie_variance = GenieVariance::as_printed;
                else
                    throw ConfigError("config: genie_variance must be exact or as_printed");
            }
            cfg.validate();
        }
        catch (const ConfigError &)
        {
            throw;
        }
        catch (const InvalidParameter &e)
        {
            throw ConfigError(e.what());
        }
        return cfg;
    }

    ExperimentConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("config: cannot open '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str());
    }

    std::string resolved_config(const ExperimentConfig &cfg)
    {
        const SystemConfig &s = cfg.system;
        const GeometryConfig &g = cfg.geometry;
        std::ostringstream os;
        // Derived values are kept as comments so the text parses back to the same config.
        os << "[system]\n"
           << "# U = " << s.U << ", B = " << s.B << "\n"
           << "L = " << s.L << "\n"
           << "M = " << s.M << "\n"
           << "T = " << s.T << "\n"
           << "seed = " << s.seed << "\n"
           << (g.kind == GeometryConfig::Kind::hex ? "# snr = " : "snr = ") << format_double(s.snr) << "\n"
           << "alpha = " << join(s.alpha) << "\n"
           << "lambda = " << join(s.lambda) << "\n"
           << "mc_se = " << s.mc_se << "\n"
           << "mc_cond = " << s.mc_cond << "\n"
           << "[geometry]\n";
        if (g.kind == GeometryConfig::Kind::wyner)
            os << "kind = wyner\n"
               << "crosstalk = " << format_double(g.crosstalk) << "\n";
        else
            os << "kind = hex\n"
               << "side = " << format_double(g.side) << "\n"
               << "d0 = " << format_double(g.d0) << "\n"
               << "gamma = " << format_double(g.gamma) << "\n"
               << "snr_rx = " << format_double(g.snr_rx) << "\n";
        os << "[experiment]\n"
           << "trials = " << cfg.trials << "\n"
           << "detection = " << (cfg.detection.kind == ThresholdMode::Kind::equal_error ? "equal_error" : "target_fa")
           << "\n";
        if (cfg.detection.kind == ThresholdMode::Kind::target_fa)
            os << "target_fa = " << format_double(cfg.detection.target) << "\n";
        os << "Q = " << cfg.Q << "\n"
           << "onsager = " << to_string(cfg.onsager) << "\n"
           << "noise = " << to_string(cfg.noise) << "\n"
           << "moment_order = " << cfg.moment_order << "\n"
           << "roc_points = " << cfg.roc_points << "\n"
           << "genie = " << (cfg.genie ? "true" : "false") << "\n"
           << "genie_variance = " << (cfg.genie_variance == GenieVariance::exact ? "exact" : "as_printed") << "\n";
        return os.str();
    }

    std::string config_hash(const ExperimentConfig &cfg)
    {
        return sha1_hex(resolved_config(cfg));
    }

    std::string sha1_hex(const std::string &text)
    {
        unsigned char digest[SHA_DIGEST_LENGTH];
        SHA1(reinterpret_cast<const unsigned char *>(text.data()), text.size(), digest);
        std::ostringstream os;
        os << std::hex << std::setfill('0');
        for (unsigned char c : digest)
            os << std::setw(2) << static_cast<int>(c);
        return os.str();
    }
}
