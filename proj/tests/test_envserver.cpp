#include "rcsim/envserver.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <thread>

using namespace rcsim;

namespace
{
    struct Running
    {
        EnvServer server;
        std::thread thread;

        explicit Running(ServerConfig cfg, TopologyRegistry reg = builtin_registry())
            : server((cfg.port = 0, cfg), std::move(reg))
        {
            server.start();
            thread = std::thread([this] { server.serve(); });
        }
        ~Running()
        {
            server.stop();
            thread.join();
        }
    };

    ServerConfig short_config()
    {
        ServerConfig cfg;
        cfg.env.episode_length = 6;
        return cfg;
    }

    std::vector<std::string> episode(LineClient &c, const std::string &topology, std::uint64_t seed,
                                     std::string *session = nullptr)
    {
        std::vector<std::string> out;
        auto w = c.request(R"({"kind":"hello","version":"rcenv/1","topology":")" + topology + "\"}");
        REQUIRE(w);
        if (session)
            *session = decode_welcome(*w).session;
        out.push_back(*c.request(R"({"kind":"reset","seed":)" + std::to_string(seed) + "}"));
        for (int a : {9, 2, 5, 5, 0, 7})
            out.push_back(*c.request(R"({"kind":"step","action":)" + std::to_string(a) + "}"));
        return out;
    }

    std::vector<std::string> in_process(const std::string &topology, std::uint64_t seed)
    {
        Session s(std::make_shared<const TopologyRegistry>(builtin_registry()), short_config().env, 0, 0);
        s.handle(R"({"kind":"hello","topology":")" + topology + "\"}");
        std::vector<std::string> out{*s.handle(R"({"kind":"reset","seed":)" + std::to_string(seed) + "}").line};
        for (int a : {9, 2, 5, 5, 0, 7})
            out.push_back(*s.handle(R"({"kind":"step","action":)" + std::to_string(a) + "}").line);
        return out;
    }
} // namespace

TEST_SUITE("envserver")
{
    TEST_CASE("concurrent sessions match in-process runs")
    {
        Running r(short_config());
        const std::vector<std::pair<std::string, std::uint64_t>> jobs{
            {"wct", 1}, {"lspt", 2}, {"rgt", 3}, {"rgt", 3}, {"wct", 8}, {"lspt", 2}};
        std::vector<std::vector<std::string>> got(jobs.size());
        std::vector<std::string> ids(jobs.size());
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < jobs.size(); ++i)
            threads.emplace_back([&, i] {
                LineClient c("127.0.0.1", r.server.port());
                got[i] = episode(c, jobs[i].first, jobs[i].second, &ids[i]);
                c.send_line(R"({"kind":"close"})");
                CHECK_FALSE(c.read_line());
            });
        for (auto &t : threads)
            t.join();
        for (std::size_t i = 0; i < jobs.size(); ++i)
            CHECK(got[i] == in_process(jobs[i].first, jobs[i].second));
        CHECK(std::set<std::string>(ids.begin(), ids.end()) ==
              std::set<std::string>{"s0", "s1", "s2", "s3", "s4", "s5"});
        CHECK(r.server.sessions_started() == jobs.size());
    }

    TEST_CASE("a fresh server numbers sessions from zero")
    {
        Running r(short_config());
        for (int i = 0; i < 3; ++i)
        {
            LineClient c("127.0.0.1", r.server.port());
            const auto w = c.request(R"({"kind":"hello","topology":"wct"})");
            REQUIRE(w);
            CHECK(decode_welcome(*w).session == "s" + std::to_string(i));
        }
    }

    TEST_CASE("malformed input closes the connection")
    {
        Running r(short_config());
        {
            LineClient c("127.0.0.1", r.server.port());
            const auto e = c.request("this is not json");
            REQUIRE(e);
            CHECK(decode_error(*e).code == "bad_request");
            CHECK_FALSE(c.read_line());
        }
        {
            LineClient c("127.0.0.1", r.server.port());
            const auto e = c.request(std::string(kMaxLineBytes + 10, 'x'));
            REQUIRE(e);
            CHECK(decode_error(*e).code == "bad_request");
            CHECK_FALSE(c.read_line());
        }
        {
            // Protocol errors keep the connection open.
            LineClient c("127.0.0.1", r.server.port());
            CHECK(decode_error(*c.request(R"({"kind":"step","action":1})")).code == "bad_state");
            CHECK(message_kind(*c.request(R"({"kind":"hello","topology":"wct"})")) == "welcome");
        }
    }

    TEST_CASE("CRLF line endings are accepted")
    {
        Running r(short_config());
        LineClient c("127.0.0.1", r.server.port());
        const auto w = c.request("{\"kind\":\"hello\",\"topology\":\"lspt\"}\r");
        REQUIRE(w);
        CHECK(message_kind(*w) == "welcome");
    }

    TEST_CASE("a busy port fails to bind")
    {
        Running r(short_config());
        ServerConfig cfg = short_config();
        cfg.port = r.server.port();
        EnvServer second(cfg, builtin_registry());
        CHECK_THROWS_AS(second.start(), std::runtime_error);

        cfg.bind = "not-an-address";
        cfg.port = 0;
        EnvServer third(cfg, builtin_registry());
        CHECK_THROWS_AS(third.start(), std::runtime_error);
    }

    TEST_CASE("extra topologies are served by name")
    {
        auto reg = builtin_registry();
        const auto tree = generate_tree(9, 4);
        reg.emplace(tree.name, tree);
        Running r(short_config(), reg);
        LineClient c("127.0.0.1", r.server.port());
        const auto w = c.request(R"({"kind":"hello","topology":")" + tree.name + "\"}");
        REQUIRE(w);
        CHECK(decode_welcome(*w).n_nodes == 9);
        const auto obs = decode_observation(*c.request(R"({"kind":"reset"})"));
        CHECK(obs.observation.node_ids.size() == 9);
    }

    TEST_CASE("connecting to a closed port fails")
    {
        std::uint16_t port = 0;
        {
            Running r(short_config());
            port = r.server.port();
        }
        CHECK_THROWS(LineClient("127.0.0.1", port));
    }
}
