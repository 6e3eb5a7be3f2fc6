#pragma once

// Helpers shared by the unit tests and the acceptance binary: random topology
// generators and oracles computed independently of the engine.

#include "rcsim/simengine.hpp"
#include "rcsim/topology.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rcsim::testing
{
    template <class T>
    const T &pick(std::mt19937_64 &rng, const std::vector<T> &choices)
    {
        return choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
    }

    inline double uniform(std::mt19937_64 &rng, double lo, double hi)
    {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }

    inline std::size_t below(std::mt19937_64 &rng, std::size_t n)
    {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }

    // Random valid DAG with 3..max_components components. Selectivities are
    // dyadic so output counts are exact: floor(processed * selectivity).
    inline TopologySpec random_dag(std::mt19937_64 &rng, std::size_t max_components = 12)
    {
        const std::size_t n = 3 + below(rng, max_components - 2);
        const std::size_t sources = 1 + below(rng, std::min<std::size_t>(2, n - 2));
        const std::size_t sinks = 1 + below(rng, std::min<std::size_t>(3, n - sources));
        const std::size_t ops = n - sources - sinks;

        TopologySpec spec;
        spec.name = "random";
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i)
        {
            ComponentSpec c;
            if (i < sources)
            {
                c.id = "s" + std::to_string(i);
                c.kind = ComponentKind::Source;
                c.base_generation_rate = pick(rng, std::vector<double>{50, 200, 500, 1000, 2000, 4000});
            }
            else if (i < sources + ops)
            {
                c.id = "o" + std::to_string(i);
                c.kind = ComponentKind::Operator;
                c.service_time = pick(rng, std::vector<double>{0.00005, 0.0002, 0.0005, 0.001, 0.002});
                c.selectivity = pick(rng, std::vector<double>{0.5, 1.0, 1.0, 2.0, 3.0, 0.25});
            }
            else
            {
                c.id = "k" + std::to_string(i);
                c.kind = ComponentKind::Sink;
                c.service_time = pick(rng, std::vector<double>{0.00005, 0.0003, 0.001});
            }
            c.queue_capacity = pick(rng, std::vector<std::size_t>{1, 4, 16, 64, 64});
            ids.push_back(c.id);
            spec.components.push_back(c);
        }

        std::vector<std::vector<bool>> linked(n, std::vector<bool>(n, false));
        std::vector<std::size_t> out_degree(n, 0);
        auto add_link = [&](std::size_t a, std::size_t b) {
            if (linked[a][b])
                return;
            linked[a][b] = true;
            ++out_degree[a];
            LinkSpec l;
            l.from = ids[a];
            l.to = ids[b];
            l.bandwidth = pick(rng, std::vector<double>{1e7, 5e7, 1e8, 1e8, 1e9});
            l.latency = pick(rng, std::vector<double>{0.0, 0.0002, 0.0005, 0.0005, 0.002});
            spec.links.push_back(l);
        };
        // Every non-source gets a predecessor among earlier sources/operators.
        for (std::size_t i = sources; i < n; ++i)
        {
            const std::size_t upper = std::min(i, sources + ops);
            add_link(below(rng, upper), i);
            if (below(rng, 3) == 0)
                add_link(below(rng, upper), i);
        }
        // Every source and operator needs an outgoing link. Links always point
        // from a lower to a higher index, so index order is topological.
        for (std::size_t i = 0; i < sources + ops; ++i)
        {
            if (out_degree[i] == 0)
            {
                const std::size_t lo = std::max(i + 1, sources);
                add_link(i, i < sources ? lo + below(rng, n - lo) : i + 1 + below(rng, n - i - 1));
            }
        }
        // Keep the flow amplification (selectivity times fan-out along all
        // paths) at or below 16 so a drain finishes in bounded time.
        std::vector<double> flow(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
        {
            auto &c = spec.components[i];
            double out = 1.0;
            if (c.kind == ComponentKind::Operator)
            {
                for (double sel : {*c.selectivity, 1.0, 0.5, 0.25})
                {
                    c.selectivity = sel;
                    if (flow[i] * sel <= 16.0)
                        break;
                }
                out = flow[i] * *c.selectivity;
            }
            for (const auto &l : spec.links)
                if (l.from == c.id)
                    flow[*spec.index_of(l.to)] += out;
        }
        return spec;
    }

    struct QueueBound
    {
        // Per component; capacity plus the arrivals an incoming link can still
        // deliver between a trigger and the moment its producer stops.
        std::vector<std::size_t> max_incoming;
    };

    inline QueueBound queue_bound(const TopologySpec &spec, const EngineConfig &cfg)
    {
        QueueBound b;
        for (const auto &c : spec.components)
            b.max_incoming.push_back(c.queue_capacity);
        const double window = 2.0 * cfg.control_latency_s + cfg.poll_interval_s;
        for (const auto &l : spec.links)
        {
            const double xfer = static_cast<double>(spec.tuple_bits()) / l.bandwidth;
            const auto extra = static_cast<std::size_t>(std::floor((window + l.latency + xfer) / xfer)) + 2;
            b.max_incoming[*spec.index_of(l.to)] += extra;
        }
        return b;
    }

    // Steady-state sink throughput of a stable topology: each source's rate
    // times the selectivity product along every path, one copy per link.
    inline double fluid_throughput(const TopologySpec &spec, double fraction = 1.0)
    {
        const std::size_t n = spec.components.size();
        std::vector<double> inflow(n, 0.0);
        double thr = 0.0;
        // Repeated relaxation in id order is enough for a DAG given n passes.
        std::vector<double> outflow(n, 0.0);
        for (std::size_t pass = 0; pass < n; ++pass)
        {
            std::fill(inflow.begin(), inflow.end(), 0.0);
            for (const auto &l : spec.links)
                inflow[*spec.index_of(l.to)] += outflow[*spec.index_of(l.from)];
            for (std::size_t i = 0; i < n; ++i)
            {
                const auto &c = spec.components[i];
                if (c.kind == ComponentKind::Source)
                    outflow[i] = c.base_generation_rate * fraction;
                else if (c.kind == ComponentKind::Operator)
                    outflow[i] = inflow[i] * *c.selectivity;
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (spec.components[i].kind == ComponentKind::Sink)
                thr += inflow[i];
        return thr;
    }

    // Random stable chain src -> op... -> sink with every component and link
    // utilization <= max_util.
    inline TopologySpec random_stable_chain(std::mt19937_64 &rng, double max_util = 0.9)
    {
        TopologySpec spec;
        spec.name = "chain";
        const std::size_t ops = 1 + below(rng, 4);
        double rate = uniform(rng, 100.0, 1500.0);
        ComponentSpec src;
        src.id = "src";
        src.kind = ComponentKind::Source;
        src.base_generation_rate = rate;
        spec.components.push_back(src);
        const double link_capacity = kDefaultBandwidthBps / static_cast<double>(spec.tuple_bits());
        double arrival = rate;
        std::string prev = "src";
        auto fits_link = [&](double flow) { return flow <= max_util * link_capacity; };
        for (std::size_t i = 0; i <= ops; ++i)
        {
            ComponentSpec c;
            const bool sink = i == ops;
            c.id = sink ? "sink" : "op" + std::to_string(i + 1);
            c.kind = sink ? ComponentKind::Sink : ComponentKind::Operator;
            const double util = uniform(rng, 0.1, max_util);
            c.service_time = util / arrival;
            if (!sink)
            {
                double sel = pick(rng, std::vector<double>{0.5, 1.0, 1.0, 2.0});
                if (!fits_link(arrival * sel))
                    sel = 0.5;
                c.selectivity = sel;
            }
            spec.components.push_back(c);
            spec.links.push_back(LinkSpec{prev, c.id});
            prev = c.id;
            if (!sink)
                arrival *= *c.selectivity;
        }
        return spec;
    }
} // namespace rcsim::testing
