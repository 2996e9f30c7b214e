#include "distq/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "distq/analysis.hpp"
#include "distq/engine.hpp"
#include "distq/learner.hpp"
#include "distq/mdp.hpp"
#include "distq/operators.hpp"
#include "distq/rng.hpp"
#include "distq/serialize.hpp"
#include "distq/svg.hpp"

namespace distq::cli {

namespace fs = std::filesystem;

namespace {

std::string default_out_dir() {
    if (const char* env = std::getenv("DISTQ_OUT_DIR"); env && *env) return env;
    return ".";
}

fs::path resolve_out(const std::string& out_dir, const std::string& name) {
    fs::path dir(out_dir);
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
}

// ---- shared option bundles -------------------------------------------------

struct MdpSource {
    std::string path;
    int states = 5;
    int actions = 20;
    double gamma = 0.9;
    double dirichlet = 0.1;
    std::uint64_t seed = 0;

    void add_options(CLI::App* cmd, bool with_file = true) {
        if (with_file)
            cmd->add_option("--mdp", path, "read the MDP from a JSON file");
        cmd->add_option("--states", states, "number of states");
        cmd->add_option("--actions", actions, "number of actions");
        cmd->add_option("--gamma", gamma, "discount factor");
        cmd->add_option("--dirichlet", dirichlet, "Dirichlet rate for transition rows");
        cmd->add_option("--seed", seed, "generator seed");
    }

    TabularMdp load(std::uint64_t seed_override) const {
        if (!path.empty()) return load_mdp(path);
        return random_mdp(seed_override, states, actions, dirichlet, gamma);
    }
    TabularMdp load() const { return load(seed); }
};

TraceSpec make_trace(const std::string& variant, double lambda, double c_bar, int n) {
    if (variant == "one-step") return TraceSpec::OneStep();
    if (variant == "n-step") return TraceSpec::NStep(n);
    if (variant == "qlambda") return TraceSpec::OffPolicyLambda(lambda);
    if (variant == "onpolicy-lambda") return TraceSpec::OnPolicyLambda(lambda);
    if (variant == "retrace") return TraceSpec::Retrace(c_bar);
    if (variant == "peng") return TraceSpec::Peng(lambda);
    if (variant == "alt-lambda") return TraceSpec::AltLambda(lambda);
    throw std::invalid_argument("unknown variant: " + variant);
}

nlohmann::json report_json(const ContractionReport& rep) {
    return nlohmann::json{{"gamma", rep.gamma},
                          {"lambda", rep.lambda},
                          {"epsilon", rep.epsilon},
                          {"beta_1", rep.beta_1},
                          {"beta_2", rep.beta_2},
                          {"radius_l1", rep.radius_l1},
                          {"radius_l2", rep.radius_l2},
                          {"contractive_l1", rep.contractive_l1},
                          {"contractive_l2", rep.contractive_l2},
                          {"beta_alt", rep.beta_alt},
                          {"radius_alt", rep.radius_alt}};
}

// ---- gen-mdp ----------------------------------------------------------------

struct GenMdpArgs {
    MdpSource src;
    std::string out = "mdp.json";
    std::string out_dir = default_out_dir();
};

int cmd_gen_mdp(const GenMdpArgs& args) {
    const TabularMdp mdp = random_mdp(args.src.seed, args.src.states, args.src.actions,
                                      args.src.dirichlet, args.src.gamma);
    const fs::path path = resolve_out(args.out_dir, args.out);
    save_mdp(mdp, path.string());
    std::cout << "wrote " << path.string() << ": " << mdp.n_states << " states, "
              << mdp.n_actions << " actions, gamma " << mdp.gamma << ", rewards ["
              << format_double(mdp.min_reward()) << ", "
              << format_double(mdp.max_reward()) << "]\n";
    return 0;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
    double gamma = 0.9;
    double lambda = 0.5;
    double epsilon = -1.0; // <0: derive from policies when an MDP is given
    std::string mdp_path;
    std::string pi_kind = "greedy-of";
    std::string mu_kind = "uniform";
    std::string out;
    std::string out_dir = default_out_dir();
};

Policy named_policy(const std::string& kind, const TabularMdp& mdp) {
    if (kind == "uniform") return uniform_policy(mdp);
    if (kind == "greedy-of" || kind == "greedy") return greedy_policy(optimal_q(mdp));
    if (kind.rfind("eps:", 0) == 0)
        return epsilon_greedy(optimal_q(mdp), std::stod(kind.substr(4)));
    if (kind.rfind("mix:", 0) == 0)
        return mix_policies(std::stod(kind.substr(4)), greedy_policy(optimal_q(mdp)),
                            uniform_policy(mdp));
    throw std::invalid_argument("unknown policy kind: " + kind);
}

int cmd_analyze(const AnalyzeArgs& args) {
    double gamma = args.gamma;
    double epsilon = args.epsilon;
    if (!args.mdp_path.empty()) {
        const TabularMdp mdp = load_mdp(args.mdp_path);
        gamma = mdp.gamma;
        epsilon = policy_l1_distance(named_policy(args.pi_kind, mdp),
                                     named_policy(args.mu_kind, mdp));
    } else if (epsilon < 0.0) {
        epsilon = 0.0;
    }
    const auto rep = make_contraction_report(gamma, args.lambda, epsilon);
    const std::string text = report_json(rep).dump(2) + "\n";
    std::cout << text;
    if (!args.out.empty()) write_file(resolve_out(args.out_dir, args.out), text);
    return 0;
}

// ---- run (single evaluate/control run) --------------------------------------

struct RunArgs {
    MdpSource src;
    std::string mode = "control";
    std::string variant = "qlambda";
    double lambda = 0.5;
    double c_bar = 1.0;
    int nstep = 1;
    double alpha = 1.0;
    double pi_alpha = 0.3; // evaluate-mode target: mix toward greedy(Q*)
    int m = 10;
    int k_max = 100;
    int oracle_traj = 2000;
    std::string out_prefix = "run";
    std::string out_dir = default_out_dir();
    bool quiet = false;
};

RunConfig run_config_from(const RunArgs& args) {
    RunConfig config;
    config.mode = args.mode == "control" ? RunConfig::Mode::control
                                         : RunConfig::Mode::evaluate;
    config.trace = make_trace(args.variant, args.lambda, args.c_bar, args.nstep);
    config.m = args.m;
    config.k_max = args.k_max;
    config.alpha = args.alpha;
    config.oracle_n_traj = args.oracle_traj;
    config.seed = args.src.seed;
    config.quiet = args.quiet;
    return config;
}

nlohmann::json run_summary(const RunConfig& config, const RunResult& result,
                           const TabularMdp& mdp) {
    const auto& last = result.logs.back();
    return nlohmann::json{
        {"mode", config.mode == RunConfig::Mode::control ? "control" : "evaluate"},
        {"trace", config.trace.name()},
        {"parameter", config.trace.parameter()},
        {"alpha", config.alpha},
        {"m", config.m},
        {"k_max", config.k_max},
        {"seed", config.seed},
        {"n_states", mdp.n_states},
        {"n_actions", mdp.n_actions},
        {"gamma", mdp.gamma},
        {"final_sup_l2", last.sup_l2_to_oracle},
        {"final_pt_l2", last.pointwise_l2_at_x0a0},
        {"final_min_mass", last.min_mass_overall},
        {"final_mass_err", last.total_mass_error}};
}

int cmd_run(const RunArgs& args) {
    const TabularMdp mdp = args.src.load();
    const Policy mu = uniform_policy(mdp);
    const RunConfig config = run_config_from(args);
    RunResult result;
    if (config.mode == RunConfig::Mode::control) {
        result = control(mdp, mu, config);
    } else {
        const Policy pi = mix_policies(args.pi_alpha, greedy_policy(optimal_q(mdp)), mu);
        result = evaluate(mdp, pi, mu, config);
    }
    write_file(resolve_out(args.out_dir, args.out_prefix + ".csv"),
               logs_to_csv(result.logs));
    write_file(resolve_out(args.out_dir, args.out_prefix + ".json"),
               run_summary(config, result, mdp).dump(2) + "\n");
    std::cout << "final sup-l2 " << format_double(result.logs.back().sup_l2_to_oracle)
              << ", pointwise " << format_double(result.logs.back().pointwise_l2_at_x0a0)
              << "\n";
    return 0;
}

// ---- sweep -------------------------------------------------------------------

struct SweepArgs {
    MdpSource src;
    std::string mode = "control";
    std::vector<std::string> variants = {"one-step", "retrace", "qlambda"};
    std::vector<double> lambdas = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> c_bars = {1.0, 2.0, 4.0};
    int seeds = 20;
    std::uint64_t seed_base = 0;
    double alpha = 1.0;
    double pi_alpha = 0.3;
    int m = 10;
    int k_max = 100;
    int oracle_traj = 2000;
    int jobs = 0;
    bool log_y = false;
    std::string out_prefix = "sweep";
    std::string out_dir = default_out_dir();
};

struct SweepCell {
    std::string variant;
    double param = 0.0;
    std::uint64_t seed = 0;
    TraceSpec trace;
    std::vector<IterationLog> logs;
    std::string error;
};

int cmd_sweep(const SweepArgs& args) {
    if (args.variants.empty() || args.seeds < 1)
        throw std::invalid_argument("sweep: empty sweep axis");
    for (const auto& v : args.variants) {
        if ((v == "qlambda" || v == "onpolicy-lambda" || v == "peng" ||
             v == "alt-lambda") && args.lambdas.empty())
            throw std::invalid_argument("sweep: empty lambda axis");
        if (v == "retrace" && args.c_bars.empty())
            throw std::invalid_argument("sweep: empty c_bar axis");
    }
    const bool is_control = args.mode == "control";

    // one MDP + oracle per seed, shared by every variant
    struct SeedContext {
        TabularMdp mdp;
        Policy mu;
        Policy pi; // evaluate-mode target
        ReturnFunction oracle;
        GridPtr grid;
    };
    std::vector<SeedContext> contexts;
    contexts.reserve(args.seeds);
    for (int s = 0; s < args.seeds; ++s) {
        SeedContext ctx;
        const std::uint64_t seed = args.seed_base + static_cast<std::uint64_t>(s);
        ctx.mdp = args.src.path.empty() ? args.src.load(seed) : args.src.load();
        ctx.mu = uniform_policy(ctx.mdp);
        RunConfig probe;
        probe.m = args.m;
        ctx.grid = run_grid(ctx.mdp, probe);
        auto rng = make_rng(seed, 0x0eac1eull);
        if (is_control) {
            const Policy pi_star = greedy_policy(optimal_q(ctx.mdp));
            ctx.oracle = mc_return_oracle(ctx.mdp, pi_star, ctx.grid, args.oracle_traj,
                                          0, rng);
        } else {
            ctx.pi = mix_policies(args.pi_alpha, greedy_policy(optimal_q(ctx.mdp)),
                                  ctx.mu);
            ctx.oracle = eta_pi_dp(ctx.mdp, ctx.pi, ctx.grid, 1e-10);
        }
        contexts.push_back(std::move(ctx));
    }

    std::vector<SweepCell> cells;
    auto add_cells = [&](const std::string& variant, double param) {
        for (int s = 0; s < args.seeds; ++s) {
            SweepCell cell;
            cell.variant = variant;
            cell.param = param;
            cell.seed = args.seed_base + static_cast<std::uint64_t>(s);
            cell.trace = make_trace(variant, param, param, std::max(1, (int)param));
            cells.push_back(std::move(cell));
        }
    };
    for (const auto& v : args.variants) {
        if (v == "one-step") add_cells(v, 0.0);
        else if (v == "retrace")
            for (double c : args.c_bars) add_cells(v, c);
        else
            for (double l : args.lambdas) add_cells(v, l);
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            SweepCell& cell = cells[i];
            const SeedContext& ctx =
                contexts[static_cast<std::size_t>(cell.seed - args.seed_base)];
            RunConfig config;
            config.mode = is_control ? RunConfig::Mode::control
                                     : RunConfig::Mode::evaluate;
            config.trace = cell.trace;
            config.m = args.m;
            config.k_max = args.k_max;
            config.alpha = args.alpha;
            config.seed = cell.seed;
            config.quiet = true;
            try {
                RunResult result =
                    is_control ? control(ctx.mdp, ctx.mu, config, &ctx.oracle)
                               : evaluate(ctx.mdp, ctx.pi, ctx.mu, config, &ctx.oracle);
                cell.logs = std::move(result.logs);
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    unsigned jobs = args.jobs > 0 ? static_cast<unsigned>(args.jobs)
                                  : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, cells.size());
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // cells CSV: k = 1..k_max rows per cell
    std::ostringstream csv;
    csv << "# distq sweep csv v1\n";
    csv << "variant,param,seed,k,sup_l2,pt_l2,min_mass,mass_err,step_change,"
           "policy_eps,error\n";
    bool any_failed = false;
    for (const auto& cell : cells) {
        if (!cell.error.empty()) {
            any_failed = true;
            std::string msg = cell.error;
            for (auto& c : msg)
                if (c == ',' || c == '\n') c = ';';
            csv << cell.variant << ',' << format_double(cell.param) << ',' << cell.seed
                << ",-1,,,,,,," << msg << '\n';
            continue;
        }
        for (const auto& row : cell.logs) {
            if (row.k == 0) continue;
            csv << cell.variant << ',' << format_double(cell.param) << ',' << cell.seed
                << ',' << row.k << ',' << format_double(row.sup_l2_to_oracle) << ','
                << format_double(row.pointwise_l2_at_x0a0) << ','
                << format_double(row.min_mass_overall) << ','
                << format_double(row.total_mass_error) << ','
                << format_double(row.step_change) << ','
                << format_double(row.target_policy_epsilon) << ",\n";
        }
    }
    write_file(resolve_out(args.out_dir, args.out_prefix + ".csv"), csv.str());

    // aggregate mean +- standard error per curve and iteration
    std::vector<svg::Series> series;
    nlohmann::json summary = nlohmann::json::array();
    std::vector<std::pair<std::string, double>> curves;
    for (const auto& cell : cells) {
        std::pair<std::string, double> key{cell.variant, cell.param};
        bool seen = false;
        for (const auto& c : curves) seen = seen || c == key;
        if (!seen) curves.push_back(key);
    }
    for (const auto& [variant, param] : curves) {
        svg::Series s;
        std::ostringstream label;
        label << variant;
        if (variant != "one-step") label << " (" << param << ")";
        s.label = label.str();
        double final_mean = 0.0, final_se = 0.0;
        for (int k = 1; k <= args.k_max; ++k) {
            double sum = 0.0, sum2 = 0.0;
            int count = 0;
            for (const auto& cell : cells) {
                if (cell.variant != variant || cell.param != param ||
                    !cell.error.empty())
                    continue;
                if (k >= static_cast<int>(cell.logs.size())) continue;
                const double v = cell.logs[k].pointwise_l2_at_x0a0;
                if (!std::isfinite(v)) continue;
                sum += v;
                sum2 += v * v;
                ++count;
            }
            if (count == 0) continue;
            const double mean = sum / count;
            const double var = std::max(0.0, sum2 / count - mean * mean);
            const double se = count > 1 ? std::sqrt(var / (count - 1)) : 0.0;
            s.xs.push_back(k);
            s.ys.push_back(mean);
            s.err.push_back(se);
            final_mean = mean;
            final_se = se;
        }
        summary.push_back(nlohmann::json{{"variant", variant},
                                         {"param", param},
                                         {"final_pt_l2_mean", final_mean},
                                         {"final_pt_l2_se", final_se}});
        series.push_back(std::move(s));
    }
    svg::ChartOptions chart;
    chart.title = (is_control ? "control" : "evaluation") + std::string(" sweep");
    chart.x_label = "iteration k";
    chart.y_label = "l2 distance to oracle at (x0,a0)";
    chart.log_y = args.log_y;
    write_file(resolve_out(args.out_dir, args.out_prefix + ".svg"),
               svg::line_chart(series, chart));
    write_file(resolve_out(args.out_dir, args.out_prefix + "_summary.json"),
               summary.dump(2) + "\n");

    std::cout << "sweep: " << cells.size() << " cells, " << curves.size()
              << " curves -> " << args.out_prefix << ".{csv,svg}\n";
    if (any_failed) {
        std::cerr << "sweep: some cells failed; see the error column\n";
        return 2;
    }
    return 0;
}

// ---- figure1 ----------------------------------------------------------------

struct Figure1Args {
    MdpSource src;
    double lambda = 0.5;
    double pi_alpha = -1.0; // <0: auto, just inside the contraction radius
    int m = 10;
    int k_max = 40;
    int track_x = 0;
    int track_a = 0;
    std::vector<int> panels = {0, 1, 2, 5, 20};
    std::string out_prefix = "figure1";
    std::string out_dir = default_out_dir();
};

int cmd_figure1(const Figure1Args& args) {
    const TabularMdp mdp = args.src.load();
    if (args.track_x < 0 || args.track_x >= mdp.n_states || args.track_a < 0 ||
        args.track_a >= mdp.n_actions)
        throw std::invalid_argument("figure1: tracked (x,a) out of range");
    const Policy mu = uniform_policy(mdp);
    double pi_alpha = args.pi_alpha;
    if (pi_alpha < 0.0) {
        const double spread = 2.0 * (1.0 - 1.0 / mdp.n_actions);
        pi_alpha = std::min(1.0, 0.9 * radius_l2(mdp.gamma, args.lambda) / spread);
    }
    const Policy pi = mix_policies(pi_alpha, greedy_policy(optimal_q(mdp)), mu);

    RunConfig config;
    config.mode = RunConfig::Mode::evaluate;
    config.trace = TraceSpec::OffPolicyLambda(args.lambda);
    config.m = args.m;
    config.k_max = args.k_max;
    config.seed = args.src.seed;
    config.tracked_x = args.track_x;
    config.tracked_a = args.track_a;
    const Figure1Trace trace = figure1_trace(mdp, pi, mu, config);

    std::ostringstream csv;
    csv << "# distq figure1 csv v1\n";
    csv << "k,atom_index,atom,mass\n";
    std::vector<svg::BarPanel> panels;
    for (int k : args.panels) {
        if (k < 0 || k >= static_cast<int>(trace.masses_per_k.size())) continue;
        const auto& masses = trace.masses_per_k[static_cast<std::size_t>(k)];
        svg::BarPanel panel;
        panel.label = "k = " + std::to_string(k);
        panel.atoms = trace.grid->atoms();
        panel.masses = masses;
        panels.push_back(std::move(panel));
        for (std::size_t i = 0; i < masses.size(); ++i)
            csv << k << ',' << i << ',' << format_double((*trace.grid)[i]) << ','
                << format_double(masses[i]) << '\n';
    }
    svg::PanelOptions popts;
    popts.title = "iterate masses at the tracked pair";
    popts.columns = static_cast<int>(panels.size());
    write_file(resolve_out(args.out_dir, args.out_prefix + ".svg"),
               svg::bar_panels(panels, popts));
    write_file(resolve_out(args.out_dir, args.out_prefix + ".csv"), csv.str());
    write_file(resolve_out(args.out_dir, args.out_prefix + "_logs.csv"),
               logs_to_csv(trace.logs));
    std::cout << "figure1: lambda " << args.lambda << ", pi mixing " << pi_alpha
              << ", min mass over run "
              << format_double([&] {
                     double lo = 0.0;
                     for (const auto& row : trace.logs)
                         lo = std::min(lo, row.min_mass_overall);
                     return lo;
                 }())
              << "\n";
    return 0;
}

// ---- learn --------------------------------------------------------------------

struct LearnArgs {
    MdpSource src;
    LearnerConfig config;
    std::string out_prefix = "learn";
    std::string out_dir = default_out_dir();

    LearnArgs() {
        src.states = 5;
        src.actions = 3;
    }
};

int cmd_learn(const LearnArgs& args) {
    TabularMdp mdp = args.src.load();
    LearnerConfig config = args.config;
    config.seed = args.src.seed;
    const TrainResult result = train(mdp, config);
    write_file(resolve_out(args.out_dir, args.out_prefix + ".csv"),
               train_log_to_csv(result.log));

    nlohmann::json params = nlohmann::json{
        {"atoms", result.grid->atoms()},
        {"n_states", result.params.n_states},
        {"n_actions", result.params.n_actions},
        {"logits", result.params.logits},
    };
    nlohmann::json summary = nlohmann::json{
        {"final_sup_q_error", result.final_sup_q_error},
        {"final_greedy_accuracy", result.final_greedy_accuracy},
        {"eval_epsilon_return", result.eval_epsilon_return},
        {"lambda", config.lambda},
        {"alpha", config.alpha},
        {"steps", config.total_steps},
        {"seed", config.seed}};
    write_file(resolve_out(args.out_dir, args.out_prefix + "_params.json"),
               params.dump() + "\n");
    write_file(resolve_out(args.out_dir, args.out_prefix + "_summary.json"),
               summary.dump(2) + "\n");
    std::cout << "learn: final sup|Q - Q*| " << format_double(result.final_sup_q_error)
              << ", greedy accuracy " << result.final_greedy_accuracy << "\n";
    return 0;
}

// ---- config file preprocessing ------------------------------------------------

// `--config FILE` holds a JSON object of long option names to values; the
// tokens are injected right after the subcommand so explicit flags override.
std::vector<std::string> inject_config(const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") config_path = args[i + 1];
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config file " + config_path);
    nlohmann::json j;
    in >> j;
    if (!j.is_object()) throw std::runtime_error("config file must hold a JSON object");

    std::vector<std::string> out;
    out.push_back(args.empty() ? "distq" : args[0]);
    if (args.size() > 1) out.push_back(args[1]); // subcommand
    for (const auto& [key, value] : j.items()) {
        out.push_back("--" + key);
        if (value.is_string())
            out.push_back(value.get<std::string>());
        else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) {
                if (!joined.empty()) joined += ",";
                joined += v.is_string() ? v.get<std::string>() : v.dump();
            }
            out.back() += "=" + joined;
        } else
            out.push_back(value.dump());
    }
    for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config") {
            ++i;
            continue;
        }
        out.push_back(args[i]);
    }
    return out;
}

} // namespace

int run(const std::vector<std::string>& raw_args) {
    CLI::App app{"distributional RL operators on categorical signed measures"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    GenMdpArgs gen_args;
    auto* gen = app.add_subcommand("gen-mdp", "generate a random tabular MDP");
    gen_args.src.add_options(gen, /*with_file=*/false);
    gen->add_option("--out", gen_args.out, "output file name");
    gen->add_option("--out-dir", gen_args.out_dir, "output directory");

    AnalyzeArgs an_args;
    auto* an = app.add_subcommand("analyze", "contraction rates and radii");
    an->add_option("--gamma", an_args.gamma, "discount factor");
    an->add_option("--lambda", an_args.lambda, "trace coefficient");
    an->add_option("--epsilon", an_args.epsilon, "off-policyness |pi - mu|_1");
    an->add_option("--mdp", an_args.mdp_path, "derive epsilon from an MDP file");
    an->add_option("--pi", an_args.pi_kind, "target policy (uniform|greedy-of|eps:X|mix:A)");
    an->add_option("--mu", an_args.mu_kind, "behavior policy kind");
    an->add_option("--out", an_args.out, "also write the report here");
    an->add_option("--out-dir", an_args.out_dir, "output directory");

    RunArgs run_args;
    auto* runc = app.add_subcommand("run", "single evaluation or control run");
    run_args.src.add_options(runc);
    runc->add_option("--mode", run_args.mode, "evaluate|control");
    runc->add_option("--variant", run_args.variant,
                     "one-step|n-step|qlambda|onpolicy-lambda|retrace|peng|alt-lambda");
    runc->add_option("--lambda", run_args.lambda, "trace coefficient");
    runc->add_option("--cbar", run_args.c_bar, "Retrace truncation");
    runc->add_option("--nstep", run_args.nstep, "n for n-step");
    runc->add_option("--alpha", run_args.alpha, "control target mixing");
    runc->add_option("--pi-alpha", run_args.pi_alpha, "evaluate-mode target mixing");
    runc->add_option("--m", run_args.m, "atom count");
    runc->add_option("--k-max", run_args.k_max, "iterations");
    runc->add_option("--oracle-traj", run_args.oracle_traj, "MC oracle trajectories");
    runc->add_option("--out-prefix", run_args.out_prefix, "output file prefix");
    runc->add_option("--out-dir", run_args.out_dir, "output directory");
    runc->add_flag("--quiet", run_args.quiet, "suppress warnings");

    SweepArgs sweep_args;
    auto* sw = app.add_subcommand("sweep", "hyperparameter sweep with CSV + SVG output");
    sweep_args.src.add_options(sw);
    sw->add_option("--mode", sweep_args.mode, "evaluate|control");
    sw->add_option("--variants", sweep_args.variants, "comma list of variants")
        ->delimiter(',');
    sw->add_option("--lambdas", sweep_args.lambdas, "lambda axis")->delimiter(',');
    sw->add_option("--cbars", sweep_args.c_bars, "Retrace truncation axis")
        ->delimiter(',');
    sw->add_option("--seeds", sweep_args.seeds, "number of seeds");
    sw->add_option("--seed-base", sweep_args.seed_base, "first seed");
    sw->add_option("--alpha", sweep_args.alpha, "control target mixing");
    sw->add_option("--pi-alpha", sweep_args.pi_alpha, "evaluate-mode target mixing");
    sw->add_option("--m", sweep_args.m, "atom count");
    sw->add_option("--k-max", sweep_args.k_max, "iterations per run");
    sw->add_option("--oracle-traj", sweep_args.oracle_traj, "MC oracle trajectories");
    sw->add_option("--jobs", sweep_args.jobs, "worker pool size (0 = auto)");
    sw->add_flag("--log-y", sweep_args.log_y, "log-scale y axis");
    sw->add_option("--out-prefix", sweep_args.out_prefix, "output file prefix");
    sw->add_option("--out-dir", sweep_args.out_dir, "output directory");

    Figure1Args fig_args;
    auto* fig = app.add_subcommand("figure1", "signed-iterate bar panels for one pair");
    fig_args.src.add_options(fig);
    fig->add_option("--lambda", fig_args.lambda, "trace coefficient");
    fig->add_option("--pi-alpha", fig_args.pi_alpha, "target mixing (<0 = auto)");
    fig->add_option("--m", fig_args.m, "atom count");
    fig->add_option("--k-max", fig_args.k_max, "iterations");
    fig->add_option("--track-x", fig_args.track_x, "tracked state");
    fig->add_option("--track-a", fig_args.track_a, "tracked action");
    fig->add_option("--panels", fig_args.panels, "iterations to render")->delimiter(',');
    fig->add_option("--out-prefix", fig_args.out_prefix, "output file prefix");
    fig->add_option("--out-dir", fig_args.out_dir, "output directory");

    LearnArgs learn_args;
    auto* le = app.add_subcommand("learn", "sample-based categorical learner");
    learn_args.src.add_options(le);
    le->add_option("--lambda", learn_args.config.lambda, "trace coefficient");
    le->add_option("--alpha", learn_args.config.alpha, "target mixing");
    le->add_option("--kappa", learn_args.config.kappa, "learning rate");
    le->add_option("--tau", learn_args.config.tau, "target update rate");
    le->add_option("--n", learn_args.config.n, "segment length");
    le->add_option("--steps", learn_args.config.total_steps, "total steps");
    le->add_option("--batch", learn_args.config.batch_size, "batch size");
    le->add_option("--replay", learn_args.config.replay_capacity, "replay capacity");
    le->add_option("--m", learn_args.config.m, "atom count");
    le->add_option("--eps-max", learn_args.config.eps_max, "initial exploration");
    le->add_option("--eps-min", learn_args.config.eps_min, "final exploration");
    le->add_option("--out-prefix", learn_args.out_prefix, "output file prefix");
    le->add_option("--out-dir", learn_args.out_dir, "output directory");

    // accepted everywhere; handled by the preprocessing pass
    std::string config_file;
    for (auto* cmd : {gen, an, runc, sw, fig, le})
        cmd->add_option("--config", config_file, "JSON config file (flags override)");

    std::vector<std::string> args;
    try {
        args = inject_config(raw_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        std::vector<const char*> argv;
        argv.reserve(args.size());
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_mdp(gen_args);
        if (an->parsed()) return cmd_analyze(an_args);
        if (runc->parsed()) return cmd_run(run_args);
        if (sw->parsed()) return cmd_sweep(sweep_args);
        if (fig->parsed()) return cmd_figure1(fig_args);
        if (le->parsed()) return cmd_learn(learn_args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc));
    for (int i = 0; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

} // namespace distq::cli
