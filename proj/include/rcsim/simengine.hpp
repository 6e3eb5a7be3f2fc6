#pragma once

#include "rcsim/rng.hpp"
#include "rcsim/topology.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <string>
#include <vector>

namespace rcsim
{
    // Nanoseconds since simulation start. 0.05 ms and 0.1 ms are exact.
    using SimTime = std::uint64_t;

    inline constexpr SimTime kNsPerSecond = 1'000'000'000ULL;

    SimTime seconds_to_ns(double seconds);
    inline double ns_to_seconds(SimTime t) noexcept { return static_cast<double>(t) * 1e-9; }

    enum class EventKind : std::uint8_t
    {
        TupleGeneration,
        ServiceStart,
        ServiceCompletion,
        TransmitComplete,
        LinkArrival,
        BpEnterSignal,
        BpExitSignal,
        BpPoll,
        RateFluctuation,
        WindowBoundary,
    };

    std::string_view to_string(EventKind kind) noexcept;

    enum class SuspendScope : std::uint8_t
    {
        // Every component with a directed path to the congested one.
        Transitive,
        // Only the immediate predecessors.
        DirectUpstream,
    };

    struct EngineConfig
    {
        // One-way delay of each control message (component <-> Nimbus).
        double control_latency_s = 0.0005;
        // Suspended components re-check the back-pressure status on this grid.
        double poll_interval_s = 0.0001;
        // Delay added to the job running on a component when it emits a
        // back-pressure enter or exit message.
        double signal_penalty_s = 0.00005;
        SuspendScope scope = SuspendScope::Transitive;
        // While a component holds back pressure, the upstream status checks
        // (one per poll interval) are answered by re-emitting its status
        // message, and each emission pays signal_penalty_s. Off = the penalty
        // is paid only on enter/exit transitions.
        bool status_refresh = true;
        // Multiplicative Uniform[0.95, 1.05] service-time jitter.
        bool service_jitter = false;
    };

    struct TupleRecord
    {
        std::uint64_t id = 0;
        SimTime created_at = 0;
        std::uint32_t size_bits = 0;
    };

    // Monotone counters; windows are formed by differencing two snapshots.
    struct ComponentCounters
    {
        // Sources: tuples generated. Others: tuples landed in the incoming queue.
        std::uint64_t tuples_in = 0;
        // Tuple copies that left the outgoing queue onto a link.
        std::uint64_t tuples_out = 0;
        // Service completions (sinks: sk_p).
        std::uint64_t tuples_processed = 0;
        // Tuple copies placed in the outgoing queue.
        std::uint64_t copies_enqueued = 0;
        // Source generation instants skipped (suspended or outgoing queue full).
        std::uint64_t forgone = 0;
        // Time spent suspended or holding an over-capacity incoming queue.
        std::uint64_t bp_time_ns = 0;
        // Sinks: sum of source-to-sink latencies of processed tuples.
        std::uint64_t latency_sum_ns = 0;
        std::uint64_t bp_entries = 0;

        ComponentCounters &operator-=(const ComponentCounters &o) noexcept;
        ComponentCounters &operator+=(const ComponentCounters &o) noexcept;
        bool operator==(const ComponentCounters &) const = default;
    };

    struct SourceRateState
    {
        double base_rate = 0.0;
        double fluctuation_multiplier = 1.0;
        double throttle_fraction = 1.0;

        double current_rate() const noexcept { return base_rate * fluctuation_multiplier * throttle_fraction; }
        double generation_capacity() const noexcept { return base_rate * fluctuation_multiplier; }
    };

    struct TraceRecord
    {
        SimTime time = 0;
        EventKind kind = EventKind::WindowBoundary;
        std::string_view component;
        std::string detail;
    };

    // "time_ns kind component detail"
    std::string format_trace(const TraceRecord &rec);

    // Action set {0.1, 0.2, ..., 1.0}.
    bool is_valid_fraction(double fraction) noexcept;
    double action_to_fraction(int action);

    struct CountersSnapshot
    {
        SimTime time = 0;
        std::vector<ComponentCounters> components;
        std::vector<SourceRateState> rates; // indexed like components; zero for non-sources
    };

    class SimEngine
    {
    public:
        SimEngine(TopologySpec spec, std::uint64_t seed, EngineConfig config = {});

        const TopologySpec &spec() const noexcept { return spec_; }
        const EngineConfig &config() const noexcept { return config_; }
        SimTime now() const noexcept { return now_; }
        std::uint64_t events_processed() const noexcept { return events_processed_; }

        // Applies to every source. Throws std::invalid_argument outside the action set.
        void set_throttle(double fraction);
        // Draws a new multiplier for every source from Uniform[lo, hi].
        void resample_fluctuation(double lo = 0.7, double hi = 1.3);
        void set_fluctuation(double multiplier);
        // Stops all generation permanently; used to drain the system.
        void halt_generation();

        void advance(double seconds);
        void advance_ns(SimTime duration);

        std::size_t component_count() const noexcept { return comps_.size(); }
        std::size_t link_count() const noexcept { return links_.size(); }
        std::size_t incoming_length(std::size_t c) const { return comps_.at(c).incoming.size(); }
        std::size_t outgoing_length(std::size_t c) const { return comps_.at(c).outgoing.size(); }
        std::size_t max_incoming_length(std::size_t c) const { return comps_.at(c).max_incoming; }
        bool in_backpressure(std::size_t c) const { return comps_.at(c).in_backpressure; }
        bool suspended(std::size_t c) const { return comps_.at(c).suspended; }
        bool busy(std::size_t c) const { return comps_.at(c).busy; }
        std::size_t pending_outputs(std::size_t c) const { return comps_.at(c).pending_outputs; }
        std::size_t in_flight(std::size_t link) const { return links_.at(link).in_flight.size(); }
        std::uint64_t link_sent(std::size_t link) const { return links_.at(link).sent; }
        std::uint64_t link_arrived(std::size_t link) const { return links_.at(link).arrived; }
        std::size_t pending_control_messages() const noexcept { return control_in_flight_; }
        const SourceRateState &source_rate(std::size_t c) const { return comps_.at(c).rate; }

        // bp time includes the open interval up to now().
        ComponentCounters counters(std::size_t c) const;
        CountersSnapshot snapshot_counters() const;

        // Full textual state, including the pending event set.
        std::string describe_state() const;

        void set_trace_sink(std::function<void(const TraceRecord &)> sink) { trace_ = std::move(sink); }

    private:
        struct Event
        {
            SimTime time;
            std::uint64_t seq;
            EventKind kind;
            std::uint8_t stage; // control messages: 0 = to Nimbus, 1 = to component
            std::uint32_t target;
            std::uint32_t origin;
            std::uint64_t token;

            bool operator>(const Event &o) const noexcept
            {
                return time != o.time ? time > o.time : seq > o.seq;
            }
        };

        struct OutEntry
        {
            TupleRecord tuple;
            std::uint32_t link;
        };

        struct ComponentRuntime
        {
            ComponentKind kind = ComponentKind::Operator;
            std::size_t capacity = kDefaultQueueCapacity;
            SimTime service_ns = 0;
            double selectivity = 1.0;
            double selectivity_acc = 0.0;
            std::vector<std::uint32_t> out_links;

            std::deque<TupleRecord> incoming;
            std::deque<OutEntry> outgoing;
            std::size_t max_incoming = 0;

            bool busy = false;
            TupleRecord in_service{};
            SimTime busy_until = 0;
            std::uint64_t service_token = 0;
            SimTime stall_until = 0;
            bool start_scheduled = false;
            std::size_t pending_outputs = 0;
            TupleRecord pending_tuple{};

            bool in_backpressure = false;
            bool suspended = false;
            SimTime suspended_since = 0;
            std::vector<std::uint32_t> suspend_votes; // per origin
            std::uint32_t suspend_total = 0;
            std::uint64_t poll_token = 0;
            bool poll_scheduled = false;

            std::uint64_t refresh_token = 0;

            bool bp_active = false;
            SimTime bp_since = 0;

            SourceRateState rate;
            SimTime gen_interval_ns = 0;
            SimTime last_gen = 0;
            std::uint64_t gen_token = 0;

            ComponentCounters counters;
        };

        struct LinkRuntime
        {
            std::uint32_t from = 0;
            std::uint32_t to = 0;
            SimTime transfer_ns = 0;
            SimTime latency_ns = 0;
            bool busy = false;
            std::deque<TupleRecord> in_flight;
            std::uint64_t sent = 0;
            std::uint64_t arrived = 0;
        };

        void push(SimTime time, EventKind kind, std::uint32_t target, std::uint64_t token = 0,
                  std::uint32_t origin = 0, std::uint8_t stage = 0);
        void process(const Event &ev);
        void trace(EventKind kind, std::uint32_t c, std::string detail);

        void on_generation(std::uint32_t c);
        void on_transmit_complete(std::uint32_t link);
        void on_link_arrival(std::uint32_t link);
        void on_service_completion(std::uint32_t c);
        void on_control(const Event &ev);
        void on_poll(std::uint32_t c);
        void on_refresh(std::uint32_t c);

        void reschedule_generation(std::uint32_t c);
        void try_start_service(std::uint32_t c);
        bool try_flush_outputs(std::uint32_t c);
        void dispatch(std::uint32_t c);
        void enter_backpressure(std::uint32_t c);
        void exit_backpressure(std::uint32_t c);
        void apply_penalty(std::uint32_t c);
        void update_bp_activity(ComponentRuntime &comp);
        SimTime service_duration(const ComponentRuntime &comp);

        TopologySpec spec_;
        EngineConfig config_;
        SimTime control_ns_;
        SimTime poll_ns_;
        SimTime penalty_ns_;

        std::vector<ComponentRuntime> comps_;
        std::vector<LinkRuntime> links_;
        std::vector<std::vector<std::uint32_t>> suspend_targets_;

        std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
        SimTime now_ = 0;
        std::uint64_t seq_ = 0;
        std::uint64_t next_tuple_id_ = 0;
        std::uint64_t events_processed_ = 0;
        std::size_t control_in_flight_ = 0;
        bool halted_ = false;

        RngStream fluctuation_rng_;
        RngStream jitter_rng_;
        std::function<void(const TraceRecord &)> trace_;
    };
} // namespace rcsim
