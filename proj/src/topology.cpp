#include "rcsim/topology.hpp"

#include "rcsim/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

namespace rcsim
{
    namespace
    {
        using ordered_json = nlohmann::ordered_json;

        // Finds y close to value*scale such that y / scale reproduces value
        // exactly, so unit conversion survives a serialize/parse cycle.
        double scaled_for_roundtrip(double value, double scale)
        {
            double y = value * scale;
            if (y / scale == value)
            {
                return y;
            }
            double up = y;
            double down = y;
            for (int i = 0; i < 16; ++i)
            {
                up = std::nextafter(up, INFINITY);
                down = std::nextafter(down, -INFINITY);
                if (up / scale == value)
                {
                    return up;
                }
                if (down / scale == value)
                {
                    return down;
                }
            }
            return y;
        }

        std::string link_name(const LinkSpec &l) { return l.from + "->" + l.to; }

        [[noreturn]] void semantic(const std::string &msg)
        {
            throw TopologyError(TopologyError::Kind::Semantic, msg);
        }

        double number_field(const ordered_json &obj, const char *key, const std::string &where)
        {
            const auto &v = obj.at(key);
            if (!v.is_number())
            {
                semantic(where + ": field '" + key + "' must be a number");
            }
            return v.get<double>();
        }

        std::string string_field(const ordered_json &obj, const char *key, const std::string &where)
        {
            if (!obj.contains(key))
            {
                semantic(where + ": missing field '" + key + "'");
            }
            const auto &v = obj.at(key);
            if (!v.is_string())
            {
                semantic(where + ": field '" + key + "' must be a string");
            }
            return v.get<std::string>();
        }

        ComponentSpec make_source(std::string id, double rate)
        {
            ComponentSpec c;
            c.id = std::move(id);
            c.kind = ComponentKind::Source;
            c.base_generation_rate = rate;
            return c;
        }

        ComponentSpec make_operator(std::string id, double service_ms, double selectivity = 1.0)
        {
            ComponentSpec c;
            c.id = std::move(id);
            c.kind = ComponentKind::Operator;
            c.service_time = service_ms / 1000.0;
            c.selectivity = selectivity;
            return c;
        }

        ComponentSpec make_sink(std::string id, double service_ms)
        {
            ComponentSpec c;
            c.id = std::move(id);
            c.kind = ComponentKind::Sink;
            c.service_time = service_ms / 1000.0;
            return c;
        }

        LinkSpec make_link(std::string from, std::string to)
        {
            LinkSpec l;
            l.from = std::move(from);
            l.to = std::move(to);
            return l;
        }
    } // namespace

    std::string_view to_string(ComponentKind kind) noexcept
    {
        switch (kind)
        {
        case ComponentKind::Source:
            return "source";
        case ComponentKind::Operator:
            return "operator";
        case ComponentKind::Sink:
            return "sink";
        }
        return "unknown";
    }

    std::optional<ComponentKind> parse_kind(std::string_view text) noexcept
    {
        if (text == "source")
            return ComponentKind::Source;
        if (text == "operator")
            return ComponentKind::Operator;
        if (text == "sink")
            return ComponentKind::Sink;
        return std::nullopt;
    }

    std::optional<std::size_t> TopologySpec::index_of(std::string_view id) const noexcept
    {
        for (std::size_t i = 0; i < components.size(); ++i)
        {
            if (components[i].id == id)
            {
                return i;
            }
        }
        return std::nullopt;
    }

    const ComponentSpec &TopologySpec::component(std::string_view id) const
    {
        auto idx = index_of(id);
        if (!idx)
        {
            throw std::out_of_range("unknown component: " + std::string(id));
        }
        return components[*idx];
    }

    std::size_t TopologySpec::count(ComponentKind kind) const noexcept
    {
        return static_cast<std::size_t>(std::count_if(components.begin(), components.end(),
                                                       [kind](const ComponentSpec &c) { return c.kind == kind; }));
    }

    std::vector<std::string> validate(const TopologySpec &spec)
    {
        std::vector<std::string> out;
        const std::size_t n = spec.components.size();

        if (spec.count(ComponentKind::Source) == 0)
        {
            out.push_back("no source component");
        }
        if (spec.tuple_bytes == 0)
        {
            out.push_back("tuple size must be positive");
        }

        std::set<std::string> seen;
        for (const auto &c : spec.components)
        {
            if (c.id.empty())
            {
                out.push_back("empty component id");
            }
            if (!seen.insert(c.id).second)
            {
                out.push_back("duplicate id: " + c.id);
            }
            const bool is_source = c.kind == ComponentKind::Source;
            if (is_source != (c.base_generation_rate > 0.0) || !std::isfinite(c.base_generation_rate) ||
                c.base_generation_rate < 0.0)
            {
                out.push_back(is_source ? "source needs positive rate: " + c.id
                                        : "rate set on non-source: " + c.id);
            }
            if (is_source == (c.service_time > 0.0) || !std::isfinite(c.service_time) || c.service_time < 0.0)
            {
                out.push_back(is_source ? "service time set on source: " + c.id
                                        : "non-positive service time: " + c.id);
            }
            const bool is_operator = c.kind == ComponentKind::Operator;
            if (is_operator != c.selectivity.has_value())
            {
                out.push_back(is_operator ? "operator missing selectivity: " + c.id
                                          : "selectivity set on non-operator: " + c.id);
            }
            else if (c.selectivity && (!(*c.selectivity >= 0.0) || !std::isfinite(*c.selectivity)))
            {
                out.push_back("negative selectivity: " + c.id);
            }
            if (c.queue_capacity < 1)
            {
                out.push_back("queue capacity below 1: " + c.id);
            }
        }

        std::vector<std::vector<std::size_t>> succ(n);
        std::vector<std::size_t> in_deg(n, 0), out_deg(n, 0);
        std::set<std::pair<std::string, std::string>> link_set;
        for (const auto &l : spec.links)
        {
            auto from = spec.index_of(l.from);
            auto to = spec.index_of(l.to);
            if (!from)
            {
                out.push_back("unknown link endpoint: " + l.from);
            }
            if (!to)
            {
                out.push_back("unknown link endpoint: " + l.to);
            }
            if (l.from == l.to)
            {
                out.push_back("self-loop: " + l.from);
            }
            if (!link_set.insert({l.from, l.to}).second)
            {
                out.push_back("duplicate link: " + link_name(l));
            }
            if (!(l.bandwidth > 0.0) || !std::isfinite(l.bandwidth))
            {
                out.push_back("non-positive bandwidth: " + link_name(l));
            }
            if (!(l.latency >= 0.0) || !std::isfinite(l.latency))
            {
                out.push_back("negative latency: " + link_name(l));
            }
            if (from && to && *from != *to)
            {
                succ[*from].push_back(*to);
                ++out_deg[*from];
                ++in_deg[*to];
            }
        }

        for (std::size_t i = 0; i < n; ++i)
        {
            const auto &c = spec.components[i];
            switch (c.kind)
            {
            case ComponentKind::Source:
                if (in_deg[i] > 0)
                    out.push_back("source has incoming link: " + c.id);
                if (out_deg[i] == 0)
                    out.push_back("source has no outgoing link: " + c.id);
                break;
            case ComponentKind::Sink:
                if (out_deg[i] > 0)
                    out.push_back("sink has outgoing link: " + c.id);
                if (in_deg[i] == 0)
                    out.push_back("sink has no incoming link: " + c.id);
                break;
            case ComponentKind::Operator:
                if (in_deg[i] == 0)
                    out.push_back("operator has no incoming link: " + c.id);
                if (out_deg[i] == 0)
                    out.push_back("operator has no outgoing link: " + c.id);
                break;
            }
        }

        // Cycle detection: Kahn leftovers are on or behind a cycle.
        {
            std::vector<std::size_t> deg = in_deg;
            std::vector<std::size_t> stack;
            for (std::size_t i = 0; i < n; ++i)
                if (deg[i] == 0)
                    stack.push_back(i);
            std::size_t visited = 0;
            while (!stack.empty())
            {
                auto u = stack.back();
                stack.pop_back();
                ++visited;
                for (auto v : succ[u])
                    if (--deg[v] == 0)
                        stack.push_back(v);
            }
            if (visited != n)
            {
                std::string ids;
                for (std::size_t i = 0; i < n; ++i)
                {
                    if (deg[i] > 0)
                    {
                        ids += ids.empty() ? "" : ",";
                        ids += spec.components[i].id;
                    }
                }
                out.push_back("cycle detected: " + ids);
            }
        }

        // Reachability from sources.
        {
            std::vector<char> reached(n, 0);
            std::vector<std::size_t> stack;
            for (std::size_t i = 0; i < n; ++i)
            {
                if (spec.components[i].kind == ComponentKind::Source)
                {
                    reached[i] = 1;
                    stack.push_back(i);
                }
            }
            while (!stack.empty())
            {
                auto u = stack.back();
                stack.pop_back();
                for (auto v : succ[u])
                {
                    if (!reached[v])
                    {
                        reached[v] = 1;
                        stack.push_back(v);
                    }
                }
            }
            for (std::size_t i = 0; i < n; ++i)
            {
                if (!reached[i])
                    out.push_back("unreachable: " + spec.components[i].id);
            }
        }
        return out;
    }

    void require_valid(const TopologySpec &spec)
    {
        auto violations = validate(spec);
        if (violations.empty())
        {
            return;
        }
        std::string msg = "invalid topology '" + spec.name + "': ";
        for (std::size_t i = 0; i < violations.size(); ++i)
        {
            msg += (i ? "; " : "") + violations[i];
        }
        semantic(msg);
    }

    TopologySpec parse_topology(std::string_view document)
    {
        ordered_json doc;
        try
        {
            doc = ordered_json::parse(document.begin(), document.end());
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw TopologyError(TopologyError::Kind::Syntax,
                                "syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
        }
        if (!doc.is_object())
        {
            semantic("topology document must be an object");
        }

        TopologySpec spec;
        spec.name = string_field(doc, "name", "topology");
        if (doc.contains("tuple_bytes"))
        {
            double bytes = number_field(doc, "tuple_bytes", "topology");
            if (!(bytes >= 1.0) || bytes != std::floor(bytes) || bytes > 1e9)
            {
                semantic("topology: tuple_bytes must be a positive integer");
            }
            spec.tuple_bytes = static_cast<std::uint32_t>(bytes);
        }
        if (!doc.contains("components") || !doc["components"].is_array())
        {
            semantic("topology: 'components' must be a list");
        }
        if (doc.contains("links") && !doc["links"].is_array())
        {
            semantic("topology: 'links' must be a list");
        }

        std::size_t idx = 0;
        for (const auto &jc : doc["components"])
        {
            std::string where = "components[" + std::to_string(idx++) + "]";
            if (!jc.is_object())
            {
                semantic(where + ": must be an object");
            }
            ComponentSpec c;
            c.id = string_field(jc, "id", where);
            auto kind = parse_kind(string_field(jc, "kind", where));
            if (!kind)
            {
                semantic(where + ": kind must be source, operator or sink");
            }
            c.kind = *kind;
            if (jc.contains("rate"))
                c.base_generation_rate = number_field(jc, "rate", where);
            if (jc.contains("service_ms"))
                c.service_time = number_field(jc, "service_ms", where) / 1000.0;
            if (jc.contains("selectivity"))
                c.selectivity = number_field(jc, "selectivity", where);
            else if (c.kind == ComponentKind::Operator)
                c.selectivity = 1.0;
            if (jc.contains("queue_capacity"))
            {
                double cap = number_field(jc, "queue_capacity", where);
                if (cap != std::floor(cap) || cap < 0.0 || cap > 1e9)
                {
                    semantic(where + ": queue_capacity must be a non-negative integer");
                }
                c.queue_capacity = static_cast<std::size_t>(cap);
            }
            spec.components.push_back(std::move(c));
        }

        idx = 0;
        if (doc.contains("links"))
        {
            for (const auto &jl : doc["links"])
            {
                std::string where = "links[" + std::to_string(idx++) + "]";
                if (!jl.is_object())
                {
                    semantic(where + ": must be an object");
                }
                LinkSpec l;
                l.from = string_field(jl, "from", where);
                l.to = string_field(jl, "to", where);
                if (jl.contains("bandwidth_bps"))
                    l.bandwidth = number_field(jl, "bandwidth_bps", where);
                if (jl.contains("latency_ms"))
                    l.latency = number_field(jl, "latency_ms", where) / 1000.0;
                spec.links.push_back(std::move(l));
            }
        }

        require_valid(spec);
        return spec;
    }

    TopologySpec load_topology_file(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw TopologyError(TopologyError::Kind::UnknownName, "cannot open topology file: " + path);
        }
        std::stringstream buf;
        buf << in.rdbuf();
        try
        {
            return parse_topology(buf.str());
        }
        catch (const TopologyError &e)
        {
            throw TopologyError(e.kind(), path + ": " + e.what());
        }
    }

    std::string serialize_topology(const TopologySpec &spec)
    {
        ordered_json doc;
        doc["name"] = spec.name;
        if (spec.tuple_bytes != kDefaultTupleBytes)
        {
            doc["tuple_bytes"] = spec.tuple_bytes;
        }
        doc["components"] = ordered_json::array();
        for (const auto &c : spec.components)
        {
            ordered_json jc;
            jc["id"] = c.id;
            jc["kind"] = std::string(to_string(c.kind));
            if (c.kind == ComponentKind::Source)
                jc["rate"] = c.base_generation_rate;
            else
                jc["service_ms"] = scaled_for_roundtrip(c.service_time, 1000.0);
            if (c.selectivity)
                jc["selectivity"] = *c.selectivity;
            if (c.queue_capacity != kDefaultQueueCapacity)
                jc["queue_capacity"] = c.queue_capacity;
            doc["components"].push_back(std::move(jc));
        }
        doc["links"] = ordered_json::array();
        for (const auto &l : spec.links)
        {
            ordered_json jl;
            jl["from"] = l.from;
            jl["to"] = l.to;
            if (l.bandwidth != kDefaultBandwidthBps)
                jl["bandwidth_bps"] = l.bandwidth;
            if (l.latency != kDefaultLinkLatencyS)
                jl["latency_ms"] = scaled_for_roundtrip(l.latency, 1000.0);
            doc["links"].push_back(std::move(jl));
        }
        return doc.dump(2) + "\n";
    }

    TopologySpec builtin(std::string_view name)
    {
        TopologySpec spec;
        spec.name = std::string(name);
        if (name == "wct")
        {
            spec.components = {make_source("src", 1000.0), make_operator("split", 0.6, 8.0),
                               make_sink("count", 0.15)};
            spec.links = {make_link("src", "split"), make_link("split", "count")};
        }
        else if (name == "lspt")
        {
            spec.components = {make_source("src", 2000.0),      make_operator("rule", 0.3),
                               make_operator("indexing", 0.55), make_operator("counting", 0.4),
                               make_sink("sink1", 0.05),        make_sink("sink2", 0.05)};
            spec.links = {make_link("src", "rule"), make_link("rule", "indexing"), make_link("rule", "counting"),
                          make_link("indexing", "sink1"), make_link("counting", "sink2")};
        }
        else if (name == "rgt")
        {
            spec.components = {make_source("src", 1500.0), make_operator("op1", 0.3), make_operator("op2", 0.4),
                               make_operator("op3", 0.3),   make_operator("op4", 0.5), make_operator("op5", 0.9),
                               make_operator("op6", 0.5),   make_sink("sk1", 0.05),    make_sink("sk2", 0.05),
                               make_sink("sk3", 0.05)};
            spec.links = {make_link("src", "op1"), make_link("op1", "op2"), make_link("op1", "op3"),
                          make_link("op2", "op4"), make_link("op3", "op5"), make_link("op3", "op6"),
                          make_link("op4", "sk1"), make_link("op5", "sk2"), make_link("op6", "sk3")};
        }
        else
        {
            throw TopologyError(TopologyError::Kind::UnknownName, "unknown builtin topology: " + std::string(name));
        }
        return spec;
    }

    const std::vector<std::string> &builtin_names()
    {
        static const std::vector<std::string> names{"wct", "lspt", "rgt"};
        return names;
    }

    TopologySpec resolve_topology(const std::string &name_or_path)
    {
        const auto &names = builtin_names();
        if (std::find(names.begin(), names.end(), name_or_path) != names.end())
        {
            return builtin(name_or_path);
        }
        return load_topology_file(name_or_path);
    }

    std::vector<std::string> topological_order(const TopologySpec &spec)
    {
        const std::size_t n = spec.components.size();
        std::vector<std::vector<std::size_t>> succ(n);
        std::vector<std::size_t> deg(n, 0);
        for (const auto &l : spec.links)
        {
            auto from = spec.index_of(l.from);
            auto to = spec.index_of(l.to);
            if (!from || !to)
            {
                throw TopologyError(TopologyError::Kind::Semantic, "unknown link endpoint in " + link_name(l));
            }
            succ[*from].push_back(*to);
            ++deg[*to];
        }
        auto by_id = [&](std::size_t a, std::size_t b) { return spec.components[a].id > spec.components[b].id; };
        std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_id)> ready(by_id);
        for (std::size_t i = 0; i < n; ++i)
            if (deg[i] == 0)
                ready.push(i);

        std::vector<std::string> order;
        order.reserve(n);
        while (!ready.empty())
        {
            auto u = ready.top();
            ready.pop();
            order.push_back(spec.components[u].id);
            for (auto v : succ[u])
                if (--deg[v] == 0)
                    ready.push(v);
        }
        if (order.size() != n)
        {
            throw TopologyError(TopologyError::Kind::Semantic, "cycle detected in topology '" + spec.name + "'");
        }
        return order;
    }

    namespace
    {
        std::size_t require_index(const TopologySpec &spec, std::string_view id)
        {
            auto idx = spec.index_of(id);
            if (!idx)
            {
                throw std::out_of_range("unknown component: " + std::string(id));
            }
            return *idx;
        }
    } // namespace

    std::vector<std::size_t> direct_upstream(const TopologySpec &spec, std::string_view id)
    {
        require_index(spec, id);
        std::set<std::size_t> out;
        for (const auto &l : spec.links)
            if (l.to == id)
                out.insert(require_index(spec, l.from));
        return {out.begin(), out.end()};
    }

    std::vector<std::size_t> upstream_closure(const TopologySpec &spec, std::string_view id)
    {
        const std::size_t target = require_index(spec, id);
        std::vector<std::vector<std::size_t>> pred(spec.components.size());
        for (const auto &l : spec.links)
            pred[require_index(spec, l.to)].push_back(require_index(spec, l.from));

        std::vector<char> seen(spec.components.size(), 0);
        std::vector<std::size_t> stack{target};
        while (!stack.empty())
        {
            auto u = stack.back();
            stack.pop_back();
            for (auto p : pred[u])
            {
                if (!seen[p])
                {
                    seen[p] = 1;
                    stack.push_back(p);
                }
            }
        }
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (seen[i] && i != target)
                out.push_back(i);
        return out;
    }

    TopologySpec generate_tree(std::size_t n, std::uint64_t seed)
    {
        if (n < 3)
        {
            throw std::invalid_argument("tree topology needs at least 3 components");
        }
        RngStream rng(mix_seed(seed, 0x7472656555ULL));
        // Node 0 is the source with a single child; every later node picks an
        // earlier non-source parent.
        std::vector<std::size_t> parent(n, 0);
        for (std::size_t i = 2; i < n; ++i)
            parent[i] = 1 + rng.below(i - 1);

        std::vector<std::size_t> children(n, 0);
        for (std::size_t i = 1; i < n; ++i)
            ++children[parent[i]];

        TopologySpec spec;
        spec.name = "tree" + std::to_string(n) + "-s" + std::to_string(seed);
        std::vector<std::string> ids(n);
        std::size_t op_count = 0, sink_count = 0;
        for (std::size_t i = 0; i < n; ++i)
        {
            if (i == 0)
                ids[i] = "src";
            else if (children[i] > 0)
                ids[i] = "op" + std::to_string(++op_count);
            else
                ids[i] = "sk" + std::to_string(++sink_count);
        }

        // Quantized profiles keep the generated documents short and exact.
        const double rate = 100.0 * static_cast<double>(5 + rng.below(16));
        for (std::size_t i = 0; i < n; ++i)
        {
            if (i == 0)
                spec.components.push_back(make_source(ids[i], rate));
            else if (children[i] > 0)
                spec.components.push_back(make_operator(ids[i], 0.05 * static_cast<double>(2 + rng.below(19))));
            else
                spec.components.push_back(make_sink(ids[i], 0.05 * static_cast<double>(1 + rng.below(4))));
        }
        for (std::size_t i = 1; i < n; ++i)
            spec.links.push_back(make_link(ids[parent[i]], ids[i]));
        require_valid(spec);
        return spec;
    }

} // namespace rcsim
