// rcsim: simulation runs, static sweeps, comparisons, the environment server,
// topology generation and charts.

#include "rcsim/baselines.hpp"
#include "rcsim/envserver.hpp"
#include "rcsim/plot.hpp"
#include "rcsim/topology.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace rcsim;

namespace
{
    struct Shared
    {
        std::string topology = "wct";
        std::uint64_t seed = 1;
        double duration_s = 300.0;
        double k_s = 1.0;
        std::string out = ".";
        bool no_status_refresh = false;
        bool direct_upstream = false;

        RunOptions run_options() const
        {
            RunOptions o;
            o.k_s = k_s;
            o.engine.status_refresh = !no_status_refresh;
            o.engine.scope = direct_upstream ? SuspendScope::DirectUpstream : SuspendScope::Transitive;
            return o;
        }
    };

    void add_shared(CLI::App *cmd, Shared &s, bool with_duration = true)
    {
        cmd->add_option("--topology", s.topology, "builtin name (wct, lspt, rgt) or topology document path");
        cmd->add_option("--seed", s.seed, "simulation seed");
        if (with_duration)
            cmd->add_option("--duration-s", s.duration_s, "simulated seconds")->check(CLI::PositiveNumber);
        cmd->add_option("--k-s", s.k_s, "metrics window length in seconds")->check(CLI::PositiveNumber);
        cmd->add_option("--out", s.out, "output directory");
        cmd->add_flag("--no-status-refresh", s.no_status_refresh,
                      "charge the signal penalty only on back-pressure transitions");
        cmd->add_flag("--direct-upstream", s.direct_upstream, "suspend only direct upstream components");
    }

    fs::path out_dir(const Shared &s)
    {
        fs::path dir(s.out);
        fs::create_directories(dir);
        return dir;
    }

    void write_text(const fs::path &path, const std::string &text)
    {
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot write " + path.string());
        f << text;
    }

    std::vector<int> read_script(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open action script: " + path);
        std::vector<int> actions;
        for (std::string line; std::getline(in, line);)
        {
            line = line.substr(0, line.find('#'));
            for (char &c : line)
                if (c == ',')
                    c = ' ';
            std::istringstream ss(line);
            for (std::string tok; ss >> tok;)
            {
                std::size_t used = 0;
                int a = -1;
                try
                {
                    a = std::stoi(tok, &used);
                }
                catch (const std::exception &)
                {
                }
                if (used != tok.size() || a < 0 || a > 9)
                    throw std::runtime_error(path + ": bad action '" + tok + "' (expected 0..9)");
                actions.push_back(a);
            }
        }
        if (actions.empty())
            throw std::runtime_error(path + ": no actions");
        return actions;
    }

    void print_report(const RunReport &r)
    {
        std::cout << r.topology << ' ' << r.controller << " thr_mean=" << format_real(r.thr_mean)
                  << " latency_mean=" << format_real(r.latency_mean)
                  << " bp_time_total=" << format_real(r.bp_time_total) << '\n';
    }

    std::string report_name(const RunReport &r) { return r.topology + "_" + r.controller + ".csv"; }

    void save_report(const fs::path &dir, const RunReport &r)
    {
        std::ostringstream csv;
        write_report_csv(csv, r);
        write_text(dir / report_name(r), csv.str());
    }

    EnvServer *g_server = nullptr;
    extern "C" void on_signal(int)
    {
        if (g_server)
            g_server->stop();
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Stream-processing back-pressure simulator and rate-control environment"};
    app.require_subcommand(1);

    // simulate
    Shared sim;
    double fraction = 1.0;
    std::string script;
    bool trace = false;
    auto *simulate = app.add_subcommand("simulate", "run one controller and write per-window CSV");
    add_shared(simulate, sim);
    auto *frac_opt = simulate->add_option("--fraction", fraction, "static throttle fraction 0.1..1.0");
    simulate->add_option("--script", script, "file with one action (0..9) per window")->excludes(frac_opt);
    simulate->add_flag("--trace", trace, "write the event trace");

    // sweep
    Shared sw;
    unsigned threads = 1;
    auto *sweep = app.add_subcommand("sweep", "run every static fraction and pick the best");
    add_shared(sweep, sw);
    sweep->add_option("--threads", threads, "parallel runs")->check(CLI::Range(1u, 10u));

    // compare
    Shared cmp;
    std::string candidate_csv, baseline_csv;
    auto *compare_cmd = app.add_subcommand("compare", "best static fraction vs default, or two saved run CSVs");
    add_shared(compare_cmd, cmp);
    auto *cand_opt = compare_cmd->add_option("--candidate", candidate_csv, "candidate run CSV");
    auto *base_opt = compare_cmd->add_option("--baseline", baseline_csv, "baseline run CSV");
    cand_opt->needs(base_opt);
    base_opt->needs(cand_opt);

    // serve
    std::string bind = "127.0.0.1";
    std::uint16_t port = kDefaultPort;
    std::string topo_dir;
    std::uint64_t base_seed = 0;
    double serve_k = 1.0;
    bool serve_no_refresh = false;
    auto *serve = app.add_subcommand("serve", "run the environment server");
    serve->add_option("--bind", bind, "IPv4 address to bind");
    serve->add_option("--port", port, "TCP port");
    serve->add_option("--topologies", topo_dir, "directory of extra topology documents");
    serve->add_option("--base-seed", base_seed, "seed root for server-derived episode seeds");
    serve->add_option("--k-s", serve_k, "metrics window length in seconds")->check(CLI::PositiveNumber);
    serve->add_flag("--no-status-refresh", serve_no_refresh,
                    "charge the signal penalty only on back-pressure transitions");

    // gen-topology
    std::size_t gen_n = 10;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    auto *gen = app.add_subcommand("gen-topology", "write a random tree-shaped topology document");
    gen->add_option("--n", gen_n, "component count")->check(CLI::Range(std::size_t{3}, std::size_t{10000}));
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output file (stdout if omitted)");

    // plot
    std::string plot_in, plot_out;
    auto *plot = app.add_subcommand("plot", "render SVG charts from a run CSV or reward CSV");
    plot->add_option("--in", plot_in, "input CSV")->required();
    plot->add_option("--out", plot_out, "output directory (defaults to the input's directory)");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*simulate)
        {
            const auto spec = resolve_topology(sim.topology);
            auto opts = sim.run_options();
            const auto dir = out_dir(sim);
            std::ofstream tf;
            if (trace)
            {
                tf.open(dir / (spec.name + "_trace.txt"), std::ios::binary);
                opts.trace = [&tf](const TraceRecord &rec) { tf << format_trace(rec) << '\n'; };
            }
            RunReport r = script.empty() ? run_fixed(spec, fraction, sim.duration_s, sim.seed, opts)
                                         : run_script(spec, read_script(script), sim.duration_s, sim.seed, opts);
            save_report(dir, r);
            print_report(r);
        }
        else if (*sweep)
        {
            const auto spec = resolve_topology(sw.topology);
            const auto result = sweep_static(spec, sw.duration_s, sw.seed, sw.run_options(), threads);
            std::ostringstream csv;
            write_sweep_csv(csv, result);
            write_text(out_dir(sw) / (spec.name + "_sweep.csv"), csv.str());
            std::cout << csv.str();
        }
        else if (*compare_cmd)
        {
            RunReport cand, base;
            if (!candidate_csv.empty())
            {
                std::ifstream a(candidate_csv), b(baseline_csv);
                if (!a)
                    throw std::runtime_error("cannot open " + candidate_csv);
                if (!b)
                    throw std::runtime_error("cannot open " + baseline_csv);
                cand = read_report_csv(a);
                base = read_report_csv(b);
            }
            else
            {
                const auto spec = resolve_topology(cmp.topology);
                const auto opts = cmp.run_options();
                auto s = sweep_static(spec, cmp.duration_s, cmp.seed, opts);
                cand = s.runs[s.best];
                base = s.runs.back();
                const auto dir = out_dir(cmp);
                save_report(dir, cand);
                save_report(dir, base);
                print_report(cand);
                print_report(base);
            }
            const auto c = compare(cand, base);
            std::cout << "thr_gain_pct=" << format_real(c.thr_gain_pct)
                      << " latency_drop_pct=" << format_real(c.latency_drop_pct)
                      << " peak_thr_gain_pct=" << format_real(c.peak_thr_gain_pct) << '\n';
        }
        else if (*serve)
        {
            ServerConfig cfg;
            cfg.bind = bind;
            cfg.port = port;
            cfg.base_seed = base_seed;
            cfg.env.k_s = serve_k;
            cfg.env.engine.status_refresh = !serve_no_refresh;
            EnvServer server(cfg, topo_dir.empty() ? builtin_registry() : load_registry(topo_dir));
            server.start();
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << bind << ':' << server.port() << " (" << kProtocolVersion << ")\n";
            server.serve();
            g_server = nullptr;
        }
        else if (*gen)
        {
            const auto doc = serialize_topology(generate_tree(gen_n, gen_seed));
            if (gen_out.empty())
                std::cout << doc;
            else
                write_text(gen_out, doc);
        }
        else if (*plot)
        {
            fs::path in(plot_in);
            fs::path dir = plot_out.empty() ? in.parent_path() : fs::path(plot_out);
            if (!dir.empty())
                fs::create_directories(dir);
            for (const auto &p : plot_csv(plot_in, (dir / in.stem()).string()))
                std::cout << p << '\n';
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "rcsim: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
