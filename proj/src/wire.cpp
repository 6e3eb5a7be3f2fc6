#include "rcsim/wire.hpp"

#include "rcsim/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace rcsim
{
    using ojson = nlohmann::ordered_json;

    namespace
    {
        ojson parse_object(std::string_view line)
        {
            ojson j = ojson::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object())
            {
                throw std::invalid_argument("not a JSON object");
            }
            return j;
        }

        const ojson &field(const ojson &j, const char *name)
        {
            auto it = j.find(name);
            if (it == j.end())
            {
                throw std::invalid_argument(std::string("missing field: ") + name);
            }
            return *it;
        }

        double real_field(const ojson &j, const char *name)
        {
            const auto &v = field(j, name);
            if (!v.is_number())
                throw std::invalid_argument(std::string("not a number: ") + name);
            return v.get<double>();
        }

        std::string string_field(const ojson &j, const char *name)
        {
            const auto &v = field(j, name);
            if (!v.is_string())
                throw std::invalid_argument(std::string("not a string: ") + name);
            return v.get<std::string>();
        }

        template <class T>
        T unsigned_field(const ojson &j, const char *name)
        {
            const auto &v = field(j, name);
            if (!v.is_number_unsigned())
                throw std::invalid_argument(std::string("not a non-negative integer: ") + name);
            return v.get<T>();
        }

        template <std::size_t N>
        std::array<double, N> real_array(const ojson &j, const char *name)
        {
            const auto &v = field(j, name);
            if (!v.is_array() || v.size() != N)
                throw std::invalid_argument(std::string("expected ") + std::to_string(N) + " values: " + name);
            std::array<double, N> out{};
            for (std::size_t i = 0; i < N; ++i)
            {
                if (!v[i].is_number())
                    throw std::invalid_argument(std::string("not a number in ") + name);
                out[i] = v[i].get<double>();
            }
            return out;
        }

        void expect_kind(const ojson &j, std::string_view kind)
        {
            if (string_field(j, "kind") != kind)
                throw std::invalid_argument("expected kind " + std::string(kind));
        }
    } // namespace

    TopologyRegistry builtin_registry()
    {
        TopologyRegistry reg;
        for (const auto &name : builtin_names())
            reg.emplace(name, builtin(name));
        return reg;
    }

    TopologyRegistry load_registry(const std::string &dir)
    {
        namespace fs = std::filesystem;
        TopologyRegistry reg = builtin_registry();
        if (!fs::is_directory(dir))
        {
            throw std::runtime_error("not a directory: " + dir);
        }
        std::vector<fs::path> files;
        for (const auto &entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto &p : files)
        {
            auto spec = load_topology_file(p.string());
            std::string key = spec.name.empty() ? p.stem().string() : spec.name;
            reg.insert_or_assign(std::move(key), std::move(spec));
        }
        return reg;
    }

    std::string encode_observation(const ObservationMessage &msg)
    {
        const auto &obs = msg.observation;
        ojson j;
        j["kind"] = "observation";
        j["step"] = msg.step;
        ojson nodes = ojson::array();
        for (std::size_t i = 0; i < obs.node_ids.size(); ++i)
        {
            ojson n;
            n["id"] = obs.node_ids[i];
            n["kind"] = std::string(to_string(obs.node_kinds[i]));
            n["features"] = obs.node_features[i];
            nodes.push_back(std::move(n));
        }
        j["nodes"] = std::move(nodes);
        ojson edges = ojson::array();
        for (std::size_t i = 0; i < obs.edges.size(); ++i)
        {
            ojson e;
            e["src"] = obs.edges[i].first;
            e["dst"] = obs.edges[i].second;
            e["features"] = obs.edge_features[i];
            edges.push_back(std::move(e));
        }
        j["edges"] = std::move(edges);
        j["reward"] = msg.reward;
        j["done"] = msg.done;
        ojson info;
        info["thr"] = msg.info.thr;
        info["mean_latency_s"] = msg.info.mean_latency;
        info["bp_time_s"] = msg.info.bp_time_total;
        j["info"] = std::move(info);
        return j.dump();
    }

    std::string encode_welcome(const WelcomeMessage &msg)
    {
        ojson j;
        j["kind"] = "welcome";
        j["version"] = msg.version;
        j["session"] = msg.session;
        j["topology"] = msg.topology;
        j["n_nodes"] = msg.n_nodes;
        j["n_edges"] = msg.n_edges;
        j["n_actions"] = msg.n_actions;
        j["feature_dim"] = msg.feature_dim;
        j["edge_feature_dim"] = msg.edge_feature_dim;
        return j.dump();
    }

    std::string encode_error(std::string_view code, std::string_view message)
    {
        ojson j;
        j["kind"] = "error";
        j["code"] = code;
        j["message"] = message;
        return j.dump();
    }

    ObservationMessage decode_observation(std::string_view line)
    {
        const ojson j = parse_object(line);
        expect_kind(j, "observation");
        ObservationMessage m;
        m.step = unsigned_field<int>(j, "step");
        const auto &nodes = field(j, "nodes");
        const auto &edges = field(j, "edges");
        if (!nodes.is_array() || !edges.is_array())
            throw std::invalid_argument("nodes and edges must be arrays");
        for (const auto &n : nodes)
        {
            m.observation.node_ids.push_back(string_field(n, "id"));
            auto kind = parse_kind(string_field(n, "kind"));
            if (!kind)
                throw std::invalid_argument("unknown node kind");
            m.observation.node_kinds.push_back(*kind);
            m.observation.node_features.push_back(real_array<kNodeFeatureDim>(n, "features"));
        }
        for (const auto &e : edges)
        {
            auto src = unsigned_field<std::size_t>(e, "src");
            auto dst = unsigned_field<std::size_t>(e, "dst");
            if (src >= nodes.size() || dst >= nodes.size())
                throw std::invalid_argument("edge index out of range");
            m.observation.edges.emplace_back(src, dst);
            m.observation.edge_features.push_back(real_array<kEdgeFeatureDim>(e, "features"));
        }
        m.reward = real_field(j, "reward");
        const auto &done = field(j, "done");
        if (!done.is_boolean())
            throw std::invalid_argument("done must be boolean");
        m.done = done.get<bool>();
        const auto &info = field(j, "info");
        m.info.thr = real_field(info, "thr");
        m.info.mean_latency = real_field(info, "mean_latency_s");
        m.info.bp_time_total = real_field(info, "bp_time_s");
        return m;
    }

    WelcomeMessage decode_welcome(std::string_view line)
    {
        const ojson j = parse_object(line);
        expect_kind(j, "welcome");
        WelcomeMessage m;
        m.version = string_field(j, "version");
        m.session = string_field(j, "session");
        m.topology = string_field(j, "topology");
        m.n_nodes = unsigned_field<std::size_t>(j, "n_nodes");
        m.n_edges = unsigned_field<std::size_t>(j, "n_edges");
        m.n_actions = unsigned_field<int>(j, "n_actions");
        m.feature_dim = unsigned_field<int>(j, "feature_dim");
        m.edge_feature_dim = unsigned_field<int>(j, "edge_feature_dim");
        return m;
    }

    ErrorMessage decode_error(std::string_view line)
    {
        const ojson j = parse_object(line);
        expect_kind(j, "error");
        return ErrorMessage{string_field(j, "code"), string_field(j, "message")};
    }

    std::string message_kind(std::string_view line)
    {
        ojson j = ojson::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            return {};
        auto it = j.find("kind");
        if (it == j.end() || !it->is_string())
            return {};
        return it->get<std::string>();
    }

    std::string_view to_string(Session::State s) noexcept
    {
        switch (s)
        {
        case Session::State::AwaitingHello:
            return "awaiting_hello";
        case Session::State::AwaitingReset:
            return "awaiting_reset";
        case Session::State::AwaitingStep:
            return "awaiting_step";
        case Session::State::Closed:
            return "closed";
        }
        return "?";
    }

    Session::Session(std::shared_ptr<const TopologyRegistry> registry, EnvConfig base, std::uint64_t index,
                     std::uint64_t base_seed)
        : registry_(std::move(registry)), base_(base), id_("s" + std::to_string(index)),
          seed_(mix_seed(base_seed, index))
    {
    }

    Session::Reply Session::handle(std::string_view line)
    {
        auto error = [](std::string_view code, std::string_view message, bool close = false) {
            return Reply{encode_error(code, message), close};
        };

        if (state_ == State::Closed)
        {
            return Reply{std::nullopt, true};
        }
        if (!line.empty() && line.back() == '\r')
        {
            line.remove_suffix(1);
        }

        ojson req = ojson::parse(line, nullptr, false);
        if (req.is_discarded() || !req.is_object())
        {
            state_ = State::Closed;
            return error("bad_request", "malformed message; closing", true);
        }
        auto kind_it = req.find("kind");
        if (kind_it == req.end() || !kind_it->is_string())
        {
            return error("bad_request", "missing string field: kind");
        }
        const std::string kind = kind_it->get<std::string>();

        if (kind == "close")
        {
            state_ = State::Closed;
            return Reply{std::nullopt, true};
        }

        if (kind == "hello")
        {
            if (state_ != State::AwaitingHello)
                return error("bad_state", "hello already received");
            auto v = req.find("version");
            if (v != req.end() && (!v->is_string() || v->get<std::string>() != kProtocolVersion))
                return error("bad_version", "server speaks " + std::string(kProtocolVersion));
            auto t = req.find("topology");
            if (t == req.end() || !t->is_string())
                return error("bad_request", "missing string field: topology");
            const std::string name = t->get<std::string>();
            auto it = registry_->find(name);
            if (it == registry_->end())
                return error("unknown_topology", "unknown topology: " + name);

            EnvConfig cfg = base_;
            cfg.seed = seed_;
            env_ = std::make_unique<Environment>(it->second, cfg);
            state_ = State::AwaitingReset;

            WelcomeMessage w;
            w.version = std::string(kProtocolVersion);
            w.session = id_;
            w.topology = name;
            w.n_nodes = it->second.components.size();
            w.n_edges = it->second.links.size();
            w.n_actions = kActionCount;
            w.feature_dim = static_cast<int>(kNodeFeatureDim);
            w.edge_feature_dim = static_cast<int>(kEdgeFeatureDim);
            return Reply{encode_welcome(w), false};
        }

        if (kind == "reset")
        {
            if (state_ == State::AwaitingHello)
                return error("bad_state", "reset before hello");
            std::optional<std::uint64_t> seed;
            if (auto s = req.find("seed"); s != req.end() && !s->is_null())
            {
                if (!s->is_number_unsigned())
                    return error("bad_request", "seed must be a non-negative integer");
                seed = s->get<std::uint64_t>();
            }
            ObservationMessage m;
            m.observation = env_->reset(seed);
            m.info = env_->last_info();
            state_ = State::AwaitingStep;
            return Reply{encode_observation(m), false};
        }

        if (kind == "step")
        {
            if (state_ != State::AwaitingStep)
                return error("bad_state", state_ == State::AwaitingHello ? "step before hello" : "step before reset");
            auto a = req.find("action");
            if (a == req.end() || !a->is_number())
                return error("bad_request", "missing numeric field: action");
            if (!a->is_number_integer() || a->get<std::int64_t>() < 0 || a->get<std::int64_t>() >= kActionCount)
                return error("bad_action", "action must be an integer in 0..9, got " + a->dump());
            StepResult r = env_->step(static_cast<int>(a->get<std::int64_t>()));
            ObservationMessage m;
            m.step = env_->step_count();
            m.observation = std::move(r.observation);
            m.reward = r.reward;
            m.done = r.done;
            m.info = r.info;
            if (r.done)
                state_ = State::AwaitingReset;
            return Reply{encode_observation(m), false};
        }

        return error("bad_request", "unknown kind: " + kind);
    }
} // namespace rcsim
