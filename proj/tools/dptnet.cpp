#include "dptnet/config.hpp"
#include "dptnet/error.hpp"
#include "dptnet/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace dptnet;

namespace {

RawConfig load(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError({{0, "cannot read " + path}});
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_raw(ss.str());
}

void report(const std::string& path, const ConfigError& e)
{
    for (const auto& d : e.diagnostics()) {
        std::cerr << path;
        if (d.line > 0)
            std::cerr << ":" << d.line;
        std::cerr << ": " << d.message << "\n";
    }
}

std::string dir_name(const std::string& key, const std::string& value)
{
    std::string s = key + "=" + value;
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '=' && c != '-' && c != '_')
            c = '_';
    return s;
}

// Runs `body`, turning library errors into exit codes.
template <class F>
int guarded(const std::string& path, F body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        report(path, e);
        return kExitConfig;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violated: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const Error& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Data plane timestamp network simulator"};
    app.require_subcommand(1);

    std::string config, out, param;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("config", config, "experiment config")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out, "output directory")->default_val("out");

    std::string extremal, periodic, bit = "FRAC:32";
    int width = 32;
    bool always = false;
    auto* enc = app.add_subcommand("encode", "print the ternary entries for a time range");
    auto* ex = enc->add_option("--extremal", extremal, "T >= T0, seconds");
    auto* per = enc->add_option("--periodic", periodic, "k:slot,slot,... over k bits");
    ex->excludes(per);
    enc->add_option("--width", width, "extremal: compile over the top N timestamp bits")
        ->default_val(32)
        ->check(CLI::Range(1, 64));
    enc->add_option("--bit", bit, "periodic: lowest slot bit, e.g. FRAC:32")->default_val("FRAC:32");
    enc->add_flag("--always", always, "periodic: allow a set covering every slot");

    auto* sweep = app.add_subcommand("sweep", "rerun an experiment for each value of one parameter");
    sweep->add_option("config", config, "experiment config")->required();
    sweep->add_option("--param", param, "section.key=v1,v2,... (';' separates values that contain commas)")
        ->required();
    sweep->add_option("--seed", seed, "override the config seed");
    sweep->add_option("--out", out, "output directory")->default_val("sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*run) {
        return guarded(config, [&] {
            auto cfg = validate_config(load(config));
            if (seed)
                cfg.seed = *seed;
            auto o = run_experiment(cfg, out);
            std::cout << o.summary;
            return o.exit_code;
        });
    }

    if (*enc) {
        return guarded("encode", [&] {
            if (extremal.empty() == periodic.empty())
                throw ConfigError({{0, "give exactly one of --extremal or --periodic"}});
            // Reuse the config validation so both paths agree on syntax.
            std::string text = "[experiment]\nkind = encode\n[app]\n";
            if (!extremal.empty())
                text += "extremal = " + extremal + "\nwidth = " + std::to_string(width) + "\n";
            else
                text += "periodic = " + periodic + "\nbit = " + bit + "\nalways = " + (always ? "true" : "false") + "\n";
            const auto cfg = parse_config(text);
            std::cout << encode_text(cfg.encode);
            return kExitOk;
        });
    }

    return guarded(config, [&] {
        const auto eq = param.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError({{0, "--param must look like section.key=v1,v2"}});
        const std::string key = param.substr(0, eq), list = param.substr(eq + 1);
        const auto values = split_list(list, list.find(';') != std::string::npos ? ';' : ',');
        const RawConfig base = load(config);

        // Validate every variant before running any.
        std::vector<ExperimentConfig> cfgs;
        for (const auto& v : values) {
            if (v.empty())
                throw ConfigError({{0, "empty value in --param"}});
            RawConfig raw = base;
            apply_override(raw, key, v);
            try {
                cfgs.push_back(validate_config(raw));
            } catch (const ConfigError& e) {
                auto diags = e.diagnostics();
                for (auto& d : diags)
                    d.message = key + "=" + v + ": " + d.message;
                throw ConfigError(diags);
            }
            if (seed)
                cfgs.back().seed = *seed;
        }

        std::filesystem::create_directories(out);
        std::string combined;
        int code = kExitOk;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto dir = std::filesystem::path(out) / dir_name(key, values[i]);
            auto o = run_experiment(cfgs[i], dir);
            std::cout << "== " << key << " = " << values[i] << "\n" << o.summary;
            std::istringstream rows(o.summary_csv);
            std::string line;
            bool header = true;
            while (std::getline(rows, line)) {
                if (header) {
                    header = false;
                    if (combined.empty())
                        combined = "param,value," + line + "\n";
                    continue;
                }
                std::string shown = values[i];
                std::replace(shown.begin(), shown.end(), ',', ';');
                combined += key + "," + shown + "," + line + "\n";
            }
            code = std::max(code, o.exit_code);
        }
        std::ofstream f(std::filesystem::path(out) / "sweep.csv", std::ios::binary | std::ios::trunc);
        f << combined;
        return code;
    });
}
