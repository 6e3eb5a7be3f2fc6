#include "rcsim/baselines.hpp"
#include "rcsim/envserver.hpp"

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char **environ;

using namespace rcsim;
namespace fs = std::filesystem;

namespace
{
    struct Result
    {
        int status = -1;
        std::string out;
        std::string err;
    };

    std::string slurp(const fs::path &p)
    {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    fs::path scratch(const std::string &name)
    {
        auto dir = fs::temp_directory_path() / ("rcsim_cli_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }

    pid_t spawn(const std::vector<std::string> &args, const fs::path &out, const fs::path &err)
    {
        std::vector<std::string> argv_s{RCSIM_CLI_PATH};
        argv_s.insert(argv_s.end(), args.begin(), args.end());
        std::vector<char *> argv;
        for (auto &a : argv_s)
            argv.push_back(a.data());
        argv.push_back(nullptr);
        posix_spawn_file_actions_t fa;
        posix_spawn_file_actions_init(&fa);
        posix_spawn_file_actions_addopen(&fa, 1, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        posix_spawn_file_actions_addopen(&fa, 2, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        pid_t pid = -1;
        const int rc = posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&fa);
        REQUIRE(rc == 0);
        return pid;
    }

    int wait_exit(pid_t pid)
    {
        int st = 0;
        waitpid(pid, &st, 0);
        return WIFEXITED(st) ? WEXITSTATUS(st) : 128 + WTERMSIG(st);
    }

    Result run(const std::vector<std::string> &args)
    {
        const auto dir = fs::temp_directory_path();
        const auto out = dir / ("rcsim_cli_out_" + std::to_string(getpid()));
        const auto err = dir / ("rcsim_cli_err_" + std::to_string(getpid()));
        Result r;
        r.status = wait_exit(spawn(args, out, err));
        r.out = slurp(out);
        r.err = slurp(err);
        fs::remove(out);
        fs::remove(err);
        return r;
    }
} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("simulate writes a reproducible per-window CSV")
    {
        const auto dir = scratch("simulate");
        const auto r = run({"simulate", "--topology", "wct", "--fraction", "0.8", "--duration-s", "10", "--out",
                            dir.string()});
        REQUIRE(r.status == 0);
        CHECK(r.out.rfind("wct static-0.8 thr_mean=", 0) == 0);
        const auto csv = dir / "wct_static-0.8.csv";
        REQUIRE(fs::exists(csv));
        const auto first = slurp(csv);

        std::ifstream in(csv);
        const auto report = read_report_csv(in);
        CHECK(report.thr_series.size() == 10);
        CHECK(report.thr_mean == doctest::Approx(6400).epsilon(0.01));

        // Same bytes as the library and as a second run.
        std::ostringstream lib;
        auto expect = run_fixed(builtin("wct"), 0.8, 10, 1);
        write_report_csv(lib, expect);
        CHECK(first == lib.str());
        REQUIRE(run({"simulate", "--topology", "wct", "--fraction", "0.8", "--duration-s", "10", "--out",
                     dir.string()})
                    .status == 0);
        CHECK(slurp(csv) == first);
        fs::remove_all(dir);
    }

    TEST_CASE("simulate with a trace and with a script")
    {
        const auto dir = scratch("script");
        std::ofstream(dir / "actions.txt") << "# warm up slowly\n0, 2 4\n9\n";
        const auto r = run({"simulate", "--topology", "lspt", "--script", (dir / "actions.txt").string(),
                            "--duration-s", "6", "--trace", "--out", dir.string()});
        REQUIRE(r.status == 0);
        std::ifstream in(dir / "lspt_script.csv");
        CHECK(read_report_csv(in).actions == std::vector<int>{0, 2, 4, 9, 9, 9});
        const auto trace = slurp(dir / "lspt_trace.txt");
        // Action 0 throttles 2000/s to 200/s before the first generation.
        CHECK(trace.find(" TupleGeneration src ") != std::string::npos);
        CHECK(trace.rfind("5000000 TupleGeneration src", 0) == 0);

        std::ofstream(dir / "bad.txt") << "3 11\n";
        const auto bad = run({"simulate", "--script", (dir / "bad.txt").string(), "--duration-s", "2", "--out",
                              dir.string()});
        CHECK(bad.status == 1);
        CHECK(bad.err.find("bad action '11'") != std::string::npos);
        fs::remove_all(dir);
    }

    TEST_CASE("sweep picks the best static fraction")
    {
        const auto dir = scratch("sweep");
        const auto r = run({"sweep", "--topology", "rgt", "--threads", "4", "--out", dir.string()});
        REQUIRE(r.status == 0);
        CHECK(r.out.find("\nbest,0.7\n") != std::string::npos);
        CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 12);
        CHECK(slurp(dir / "rgt_sweep.csv") == r.out);
        fs::remove_all(dir);
    }

    TEST_CASE("compare")
    {
        const auto dir = scratch("compare");
        const auto r = run({"compare", "--topology", "wct", "--duration-s", "20", "--out", dir.string()});
        REQUIRE(r.status == 0);
        std::smatch m;
        REQUIRE(std::regex_search(r.out, m, std::regex("thr_gain_pct=([-0-9.e]+) latency_drop_pct=([-0-9.e]+)")));
        CHECK(std::stod(m[1]) > 0);
        CHECK(std::stod(m[2]) > 0);
        REQUIRE(fs::exists(dir / "wct_default.csv"));
        REQUIRE(fs::exists(dir / "wct_static-0.8.csv"));

        const auto files = run({"compare", "--candidate", (dir / "wct_static-0.8.csv").string(), "--baseline",
                                (dir / "wct_default.csv").string()});
        REQUIRE(files.status == 0);
        CHECK(files.out == r.out.substr(r.out.find("thr_gain_pct=")));

        const auto lonely = run({"compare", "--candidate", (dir / "wct_default.csv").string()});
        CHECK(lonely.status != 0);
        fs::remove_all(dir);
    }

    TEST_CASE("gen-topology")
    {
        const auto a = run({"gen-topology", "--n", "12", "--seed", "3"});
        REQUIRE(a.status == 0);
        CHECK(parse_topology(a.out) == generate_tree(12, 3));
        const auto dir = scratch("gen");
        REQUIRE(run({"gen-topology", "--n", "12", "--seed", "3", "--out", (dir / "t.json").string()}).status == 0);
        CHECK(slurp(dir / "t.json") == a.out);
        CHECK(run({"gen-topology", "--n", "10", "--seed", "7"}).out == run({"gen-topology", "--n", "10", "--seed", "7"}).out);
        CHECK(run({"gen-topology", "--n", "2"}).status != 0);

        // A generated file runs like a builtin.
        const auto sim = run({"simulate", "--topology", (dir / "t.json").string(), "--duration-s", "2", "--out",
                              dir.string()});
        CHECK(sim.status == 0);
        fs::remove_all(dir);
    }

    TEST_CASE("plot")
    {
        const auto dir = scratch("plot");
        REQUIRE(run({"simulate", "--topology", "wct", "--duration-s", "3", "--out", dir.string()}).status == 0);
        std::ifstream in(dir / "wct_default.csv");
        CHECK(read_report_csv(in).bp_time_total > 0);
        const auto r = run({"plot", "--in", (dir / "wct_default.csv").string()});
        REQUIRE(r.status == 0);
        CHECK(fs::exists(dir / "wct_default_throughput.svg"));
        CHECK(fs::exists(dir / "wct_default_latency.svg"));
        fs::remove_all(dir);
    }

    TEST_CASE("errors exit with status 1")
    {
        const auto unknown = run({"simulate", "--topology", "nope", "--duration-s", "1"});
        CHECK(unknown.status == 1);
        CHECK(unknown.err.rfind("rcsim: ", 0) == 0);

        const auto missing = run({"simulate", "--topology", "/no/such/topo.json", "--duration-s", "1"});
        CHECK(missing.status == 1);
        CHECK(missing.err.find("/no/such/topo.json") != std::string::npos);

        const auto dir = scratch("errors");
        std::ofstream(dir / "cyc.json") << R"({"name":"cyc","components":[
            {"id":"src","kind":"source","rate":10},{"id":"a","kind":"operator","service_ms":1},
            {"id":"b","kind":"operator","service_ms":1},{"id":"k","kind":"sink","service_ms":1}],
            "links":[{"from":"src","to":"a"},{"from":"a","to":"b"},{"from":"b","to":"a"},{"from":"b","to":"k"}]})";
        const auto cyc = run({"simulate", "--topology", (dir / "cyc.json").string(), "--duration-s", "1"});
        CHECK(cyc.status == 1);
        CHECK(cyc.err.find("cycle detected") != std::string::npos);

        CHECK(run({"simulate", "--fraction", "0.85", "--duration-s", "1", "--out", dir.string()}).status == 1);
        CHECK(run({"simulate", "--duration-s", "1.5", "--out", dir.string()}).status == 1);
        CHECK(run({}).status != 0);
        CHECK(run({"bogus"}).status != 0);
        fs::remove_all(dir);
    }

    TEST_CASE("serve answers the line protocol and stops on SIGTERM")
    {
        const auto dir = scratch("serve");
        const auto out = dir / "out.txt", err = dir / "err.txt";
        const pid_t pid = spawn({"serve", "--port", "0", "--base-seed", "9"}, out, err);
        std::uint16_t port = 0;
        const std::regex listening("listening on 127\\.0\\.0\\.1:([0-9]+)");
        for (int i = 0; i < 100 && port == 0; ++i)
        {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
            std::smatch m;
            const auto text = slurp(err);
            if (std::regex_search(text, m, listening))
                port = static_cast<std::uint16_t>(std::stoi(m[1]));
        }
        REQUIRE(port != 0);
        {
            LineClient c("127.0.0.1", port);
            const auto w = c.request(R"({"kind":"hello","version":"rcenv/1","topology":"rgt"})");
            REQUIRE(w);
            CHECK(decode_welcome(*w).session == "s0");
            CHECK(message_kind(*c.request(R"({"kind":"reset"})")) == "observation");
            CHECK(decode_observation(*c.request(R"({"kind":"step","action":6})")).step == 1);
        }
        kill(pid, SIGTERM);
        CHECK(wait_exit(pid) == 0);
        fs::remove_all(dir);
    }
}
