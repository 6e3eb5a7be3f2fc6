#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rcsim
{
    enum class ComponentKind : std::uint8_t
    {
        Source,
        Operator,
        Sink,
    };

    std::string_view to_string(ComponentKind kind) noexcept;
    std::optional<ComponentKind> parse_kind(std::string_view text) noexcept;

    inline constexpr std::size_t kDefaultQueueCapacity = 64;
    inline constexpr double kDefaultBandwidthBps = 100'000'000.0;
    inline constexpr double kDefaultLinkLatencyS = 0.0005;
    inline constexpr std::uint32_t kDefaultTupleBytes = 1024;

    struct ComponentSpec
    {
        std::string id;
        ComponentKind kind = ComponentKind::Operator;
        // tuples/second; non-zero for sources only.
        double base_generation_rate = 0.0;
        // seconds per tuple; non-zero for operators and sinks.
        double service_time = 0.0;
        // output tuples per input tuple; operators only.
        std::optional<double> selectivity;
        std::size_t queue_capacity = kDefaultQueueCapacity;

        bool operator==(const ComponentSpec &) const = default;
    };

    struct LinkSpec
    {
        std::string from;
        std::string to;
        double bandwidth = kDefaultBandwidthBps; // bits/second
        double latency = kDefaultLinkLatencyS;   // seconds

        bool operator==(const LinkSpec &) const = default;
    };

    struct TopologySpec
    {
        std::string name;
        std::vector<ComponentSpec> components;
        std::vector<LinkSpec> links;
        std::uint32_t tuple_bytes = kDefaultTupleBytes;

        std::optional<std::size_t> index_of(std::string_view id) const noexcept;
        const ComponentSpec &component(std::string_view id) const;
        std::size_t count(ComponentKind kind) const noexcept;
        std::uint64_t tuple_bits() const noexcept { return std::uint64_t{tuple_bytes} * 8; }

        bool operator==(const TopologySpec &) const = default;
    };

    class TopologyError : public std::runtime_error
    {
    public:
        enum class Kind : std::uint8_t
        {
            Syntax,
            Semantic,
            UnknownName,
        };

        TopologyError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
        Kind kind() const noexcept { return kind_; }

    private:
        Kind kind_;
    };

    // Every violated invariant, one human-readable line each. Empty means valid.
    std::vector<std::string> validate(const TopologySpec &spec);

    // Throws TopologyError(Semantic) listing all violations.
    void require_valid(const TopologySpec &spec);

    // Parses a topology-config document (JSON). Applies defaults for omitted
    // bandwidth, latency, queue capacity and selectivity, then validates.
    TopologySpec parse_topology(std::string_view document);
    TopologySpec load_topology_file(const std::string &path);
    std::string serialize_topology(const TopologySpec &spec);

    // "wct", "lspt" or "rgt".
    TopologySpec builtin(std::string_view name);
    const std::vector<std::string> &builtin_names();

    // Name of a builtin, or a path to a document.
    TopologySpec resolve_topology(const std::string &name_or_path);

    // Kahn's algorithm, ties broken by lexicographic id.
    std::vector<std::string> topological_order(const TopologySpec &spec);

    // Component indices (into spec.components) with a directed path to `id`.
    std::vector<std::size_t> upstream_closure(const TopologySpec &spec, std::string_view id);
    std::vector<std::size_t> direct_upstream(const TopologySpec &spec, std::string_view id);

    // Seeded random tree-shaped topology: one source, operators on internal
    // nodes, sinks on the leaves. n >= 3.
    TopologySpec generate_tree(std::size_t n, std::uint64_t seed);

} // namespace rcsim
