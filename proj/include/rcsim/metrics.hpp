#pragma once

#include "rcsim/simengine.hpp"
#include "rcsim/topology.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rcsim
{
    // Shortest representation that parses back to the same double.
    inline std::string format_real(double value)
    {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof(buf), value);
        return std::string(buf, res.ptr);
    }

    // Per-component metrics over one window. Fields not meaningful for a kind
    // stay zero.
    struct ComponentMetrics
    {
        std::string id;
        ComponentKind kind = ComponentKind::Operator;

        double r_g = 0.0;              // sources: generation capacity, tuples/s
        double r_c = 0.0;              // sources: current emission rate, tuples/s
        double bk = 0.0;               // src_bk / op_bk / sk_bk, seconds
        std::uint64_t in = 0;          // op_in / sk_in
        std::uint64_t out = 0;         // src_out / op_out
        std::size_t max_in = 0;        // op_max_in / sk_max_in
        std::size_t max_out = 0;       // src_max / op_max_out
        double latency_sum = 0.0;      // sk_l, seconds
        std::uint64_t processed = 0;   // sk_p

        // Fluid-model rates at full generation capacity, used to scale counts.
        double nominal_in_rate = 0.0;
        double nominal_out_rate = 0.0;
    };

    struct MetricsWindow
    {
        double k = 1.0; // window length, seconds
        SimTime start = 0;
        SimTime end = 0;
        std::vector<ComponentMetrics> components; // spec order

        const ComponentMetrics &at(std::string_view id) const;
    };

    struct ThroughputReport
    {
        double thr = 0.0;          // tuples/s at sinks
        double mean_latency = 0.0; // seconds
        double bp_time_total = 0.0; // seconds, summed over components

        bool operator==(const ThroughputReport &) const = default;
    };

    struct FeatureScale
    {
        double max_rate = 2000.0;
        double ref_capacity = 64.0;
        double ref_bandwidth = 100'000'000.0;
        double ref_latency = 0.0005;
    };

    inline constexpr std::size_t kNodeFeatureDim = 8;
    inline constexpr std::size_t kEdgeFeatureDim = 2;

    using NodeFeatures = std::array<double, kNodeFeatureDim>;
    using EdgeFeatures = std::array<double, kEdgeFeatureDim>;

    // Differences two counter snapshots of the same engine into a window.
    MetricsWindow window_between(const TopologySpec &spec, const CountersSnapshot &begin,
                                 const CountersSnapshot &end);

    // Remembers the previous snapshot so each collect() covers the time since
    // the last one.
    class WindowCollector
    {
    public:
        explicit WindowCollector(const SimEngine &engine) : last_(engine.snapshot_counters()) {}

        MetricsWindow collect(const SimEngine &engine);

    private:
        CountersSnapshot last_;
    };

    double throughput(const MetricsWindow &window);
    double mean_latency(const MetricsWindow &window);
    double bp_time_total(const MetricsWindow &window);
    ThroughputReport report(const MetricsWindow &window);

    NodeFeatures node_features(const MetricsWindow &window, std::string_view id, const FeatureScale &scale = {});
    EdgeFeatures edge_features(const LinkSpec &link, const FeatureScale &scale = {});

    // window_index,thr,mean_latency,bp_time_total,action
    std::string csv_header();
    std::string csv_row(std::size_t window_index, const ThroughputReport &r, int action);
} // namespace rcsim
