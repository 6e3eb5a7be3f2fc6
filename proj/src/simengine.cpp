#include "rcsim/simengine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rcsim
{
    SimTime seconds_to_ns(double seconds)
    {
        if (!(seconds >= 0.0) || !std::isfinite(seconds))
        {
            throw std::invalid_argument("time must be finite and non-negative");
        }
        return static_cast<SimTime>(std::llround(seconds * 1e9));
    }

    std::string_view to_string(EventKind kind) noexcept
    {
        switch (kind)
        {
        case EventKind::TupleGeneration:
            return "TupleGeneration";
        case EventKind::ServiceStart:
            return "ServiceStart";
        case EventKind::ServiceCompletion:
            return "ServiceCompletion";
        case EventKind::TransmitComplete:
            return "TransmitComplete";
        case EventKind::LinkArrival:
            return "LinkArrival";
        case EventKind::BpEnterSignal:
            return "BpEnterSignal";
        case EventKind::BpExitSignal:
            return "BpExitSignal";
        case EventKind::BpPoll:
            return "BpPoll";
        case EventKind::RateFluctuation:
            return "RateFluctuation";
        case EventKind::WindowBoundary:
            return "WindowBoundary";
        }
        return "Unknown";
    }

    std::string format_trace(const TraceRecord &rec)
    {
        std::string out = std::to_string(rec.time);
        out += ' ';
        out += to_string(rec.kind);
        out += ' ';
        out += rec.component.empty() ? std::string_view("-") : rec.component;
        if (!rec.detail.empty())
        {
            out += ' ';
            out += rec.detail;
        }
        return out;
    }

    bool is_valid_fraction(double fraction) noexcept
    {
        const double scaled = fraction * 10.0;
        const double k = std::round(scaled);
        return k >= 1.0 && k <= 10.0 && std::abs(scaled - k) < 1e-9;
    }

    double action_to_fraction(int action)
    {
        if (action < 0 || action > 9)
        {
            throw std::out_of_range("action must be in 0..9");
        }
        return static_cast<double>(action + 1) / 10.0;
    }

    ComponentCounters &ComponentCounters::operator-=(const ComponentCounters &o) noexcept
    {
        tuples_in -= o.tuples_in;
        tuples_out -= o.tuples_out;
        tuples_processed -= o.tuples_processed;
        copies_enqueued -= o.copies_enqueued;
        forgone -= o.forgone;
        bp_time_ns -= o.bp_time_ns;
        latency_sum_ns -= o.latency_sum_ns;
        bp_entries -= o.bp_entries;
        return *this;
    }

    ComponentCounters &ComponentCounters::operator+=(const ComponentCounters &o) noexcept
    {
        tuples_in += o.tuples_in;
        tuples_out += o.tuples_out;
        tuples_processed += o.tuples_processed;
        copies_enqueued += o.copies_enqueued;
        forgone += o.forgone;
        bp_time_ns += o.bp_time_ns;
        latency_sum_ns += o.latency_sum_ns;
        bp_entries += o.bp_entries;
        return *this;
    }

    SimEngine::SimEngine(TopologySpec spec, std::uint64_t seed, EngineConfig config)
        : spec_(std::move(spec)), config_(config), control_ns_(seconds_to_ns(config.control_latency_s)),
          poll_ns_(seconds_to_ns(config.poll_interval_s)), penalty_ns_(seconds_to_ns(config.signal_penalty_s)),
          fluctuation_rng_(mix_seed(seed, 1)), jitter_rng_(mix_seed(seed, 2))
    {
        require_valid(spec_);
        if (poll_ns_ == 0)
        {
            throw std::invalid_argument("poll interval must be positive");
        }

        const std::size_t n = spec_.components.size();
        comps_.resize(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            const auto &cs = spec_.components[i];
            auto &c = comps_[i];
            c.kind = cs.kind;
            c.capacity = cs.queue_capacity;
            c.service_ns = cs.kind == ComponentKind::Source ? 0 : std::max<SimTime>(1, seconds_to_ns(cs.service_time));
            c.selectivity = cs.selectivity.value_or(1.0);
            c.suspend_votes.assign(n, 0);
            c.rate.base_rate = cs.kind == ComponentKind::Source ? cs.base_generation_rate : 0.0;
        }

        const auto bits = static_cast<double>(spec_.tuple_bits());
        for (const auto &ls : spec_.links)
        {
            LinkRuntime l;
            l.from = static_cast<std::uint32_t>(*spec_.index_of(ls.from));
            l.to = static_cast<std::uint32_t>(*spec_.index_of(ls.to));
            l.transfer_ns = std::max<SimTime>(1, static_cast<SimTime>(std::llround(bits / ls.bandwidth * 1e9)));
            l.latency_ns = seconds_to_ns(ls.latency);
            comps_[l.from].out_links.push_back(static_cast<std::uint32_t>(links_.size()));
            links_.push_back(std::move(l));
        }

        suspend_targets_.resize(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            const auto &id = spec_.components[i].id;
            auto targets = config_.scope == SuspendScope::Transitive ? upstream_closure(spec_, id)
                                                                     : direct_upstream(spec_, id);
            suspend_targets_[i].assign(targets.begin(), targets.end());
        }

        for (std::uint32_t i = 0; i < n; ++i)
        {
            if (comps_[i].kind == ComponentKind::Source)
            {
                reschedule_generation(i);
            }
        }
    }

    void SimEngine::push(SimTime time, EventKind kind, std::uint32_t target, std::uint64_t token,
                         std::uint32_t origin, std::uint8_t stage)
    {
        events_.push(Event{time, seq_++, kind, stage, target, origin, token});
    }

    void SimEngine::trace(EventKind kind, std::uint32_t c, std::string detail)
    {
        trace_(TraceRecord{now_, kind, spec_.components[c].id, std::move(detail)});
    }

    void SimEngine::set_throttle(double fraction)
    {
        if (!is_valid_fraction(fraction))
        {
            throw std::invalid_argument("throttle fraction outside {0.1, ..., 1.0}: " + std::to_string(fraction));
        }
        for (std::uint32_t i = 0; i < comps_.size(); ++i)
        {
            if (comps_[i].kind == ComponentKind::Source && comps_[i].rate.throttle_fraction != fraction)
            {
                comps_[i].rate.throttle_fraction = fraction;
                reschedule_generation(i);
            }
        }
    }

    void SimEngine::resample_fluctuation(double lo, double hi)
    {
        for (std::uint32_t i = 0; i < comps_.size(); ++i)
        {
            if (comps_[i].kind != ComponentKind::Source)
                continue;
            comps_[i].rate.fluctuation_multiplier = fluctuation_rng_.uniform(lo, hi);
            reschedule_generation(i);
            if (trace_)
            {
                std::ostringstream os;
                os.precision(17);
                os << "multiplier=" << comps_[i].rate.fluctuation_multiplier;
                trace(EventKind::RateFluctuation, i, os.str());
            }
        }
    }

    void SimEngine::set_fluctuation(double multiplier)
    {
        if (!(multiplier > 0.0) || !std::isfinite(multiplier))
        {
            throw std::invalid_argument("fluctuation multiplier must be positive");
        }
        for (std::uint32_t i = 0; i < comps_.size(); ++i)
        {
            if (comps_[i].kind == ComponentKind::Source)
            {
                comps_[i].rate.fluctuation_multiplier = multiplier;
                reschedule_generation(i);
            }
        }
    }

    void SimEngine::halt_generation()
    {
        halted_ = true;
        for (auto &c : comps_)
        {
            ++c.gen_token;
        }
    }

    void SimEngine::reschedule_generation(std::uint32_t c)
    {
        auto &s = comps_[c];
        ++s.gen_token;
        const double rate = s.rate.current_rate();
        if (halted_ || !(rate > 0.0))
        {
            s.gen_interval_ns = 0;
            return;
        }
        s.gen_interval_ns = std::max<SimTime>(1, static_cast<SimTime>(std::llround(1e9 / rate)));
        push(std::max(now_, s.last_gen + s.gen_interval_ns), EventKind::TupleGeneration, c, s.gen_token);
    }

    void SimEngine::advance(double seconds)
    {
        if (!(seconds > 0.0))
        {
            throw std::invalid_argument("advance duration must be positive");
        }
        advance_ns(seconds_to_ns(seconds));
    }

    void SimEngine::advance_ns(SimTime duration)
    {
        const SimTime end = now_ + duration;
        push(end, EventKind::WindowBoundary, 0);
        while (!events_.empty() && events_.top().time <= end)
        {
            Event ev = events_.top();
            events_.pop();
            process(ev);
        }
        now_ = end;
    }

    void SimEngine::process(const Event &ev)
    {
        // Cancelled events carry an outdated token and are dropped silently.
        switch (ev.kind)
        {
        case EventKind::TupleGeneration:
            if (ev.token != comps_[ev.target].gen_token)
                return;
            break;
        case EventKind::ServiceCompletion:
            if (ev.token != comps_[ev.target].service_token)
                return;
            break;
        case EventKind::BpPoll:
            if (ev.token != (ev.stage == 2 ? comps_[ev.target].refresh_token : comps_[ev.target].poll_token))
                return;
            break;
        default:
            break;
        }

        now_ = ev.time;
        ++events_processed_;
        switch (ev.kind)
        {
        case EventKind::TupleGeneration:
            on_generation(ev.target);
            break;
        case EventKind::ServiceStart:
            comps_[ev.target].start_scheduled = false;
            try_start_service(ev.target);
            break;
        case EventKind::ServiceCompletion:
            on_service_completion(ev.target);
            break;
        case EventKind::TransmitComplete:
            on_transmit_complete(ev.target);
            break;
        case EventKind::LinkArrival:
            on_link_arrival(ev.target);
            break;
        case EventKind::BpEnterSignal:
        case EventKind::BpExitSignal:
            on_control(ev);
            break;
        case EventKind::BpPoll:
            if (ev.stage == 2)
                on_refresh(ev.target);
            else
                on_poll(ev.target);
            break;
        case EventKind::RateFluctuation:
            break;
        case EventKind::WindowBoundary:
            if (trace_)
                trace_(TraceRecord{now_, EventKind::WindowBoundary, {}, {}});
            break;
        }
    }

    void SimEngine::on_generation(std::uint32_t c)
    {
        auto &s = comps_[c];
        s.last_gen = now_;
        const std::size_t copies = s.out_links.size();
        if (s.suspended || (!s.outgoing.empty() && s.outgoing.size() + copies > s.capacity))
        {
            ++s.counters.forgone;
            if (trace_)
                trace(EventKind::TupleGeneration, c, s.suspended ? "forgone suspended" : "forgone full");
        }
        else
        {
            TupleRecord t{next_tuple_id_++, now_, static_cast<std::uint32_t>(spec_.tuple_bits())};
            ++s.counters.tuples_in;
            for (auto link : s.out_links)
                s.outgoing.push_back(OutEntry{t, link});
            s.counters.copies_enqueued += copies;
            if (trace_)
                trace(EventKind::TupleGeneration, c, "tuple=" + std::to_string(t.id));
            dispatch(c);
        }
        push(now_ + s.gen_interval_ns, EventKind::TupleGeneration, c, s.gen_token);
    }

    SimTime SimEngine::service_duration(const ComponentRuntime &comp)
    {
        if (!config_.service_jitter)
        {
            return comp.service_ns;
        }
        const double scaled = static_cast<double>(comp.service_ns) * jitter_rng_.uniform(0.95, 1.05);
        return std::max<SimTime>(1, static_cast<SimTime>(std::llround(scaled)));
    }

    void SimEngine::try_start_service(std::uint32_t c)
    {
        auto &s = comps_[c];
        if (s.kind == ComponentKind::Source || s.busy || s.pending_outputs > 0 || s.incoming.empty())
        {
            return;
        }
        if (now_ < s.stall_until)
        {
            if (!s.start_scheduled)
            {
                s.start_scheduled = true;
                push(s.stall_until, EventKind::ServiceStart, c);
            }
            return;
        }
        s.in_service = s.incoming.front();
        s.incoming.pop_front();
        s.busy = true;
        s.busy_until = now_ + service_duration(s);
        push(s.busy_until, EventKind::ServiceCompletion, c, ++s.service_token);
        if (trace_)
            trace(EventKind::ServiceStart, c,
                  "tuple=" + std::to_string(s.in_service.id) + " q=" + std::to_string(s.incoming.size()));
        if (s.in_backpressure && s.incoming.size() < s.capacity)
        {
            exit_backpressure(c);
        }
    }

    void SimEngine::on_service_completion(std::uint32_t c)
    {
        auto &s = comps_[c];
        s.busy = false;
        ++s.counters.tuples_processed;
        if (s.kind == ComponentKind::Sink)
        {
            const SimTime latency = now_ - s.in_service.created_at;
            s.counters.latency_sum_ns += latency;
            if (trace_)
                trace(EventKind::ServiceCompletion, c,
                      "tuple=" + std::to_string(s.in_service.id) + " latency_ns=" + std::to_string(latency));
            try_start_service(c);
            return;
        }

        s.selectivity_acc += s.selectivity;
        const double whole = std::floor(s.selectivity_acc);
        s.selectivity_acc -= whole;
        s.pending_outputs = static_cast<std::size_t>(whole);
        s.pending_tuple = s.in_service;
        if (trace_)
            trace(EventKind::ServiceCompletion, c,
                  "tuple=" + std::to_string(s.in_service.id) + " out=" + std::to_string(s.pending_outputs));
        if (try_flush_outputs(c))
        {
            dispatch(c);
            try_start_service(c);
        }
    }

    bool SimEngine::try_flush_outputs(std::uint32_t c)
    {
        auto &s = comps_[c];
        if (s.pending_outputs == 0)
        {
            return true;
        }
        const std::size_t need = s.pending_outputs * s.out_links.size();
        if (!s.outgoing.empty() && s.outgoing.size() + need > s.capacity)
        {
            return false;
        }
        for (std::size_t k = 0; k < s.pending_outputs; ++k)
        {
            TupleRecord t{next_tuple_id_++, s.pending_tuple.created_at, s.pending_tuple.size_bits};
            for (auto link : s.out_links)
                s.outgoing.push_back(OutEntry{t, link});
        }
        s.counters.copies_enqueued += need;
        s.pending_outputs = 0;
        return true;
    }

    void SimEngine::dispatch(std::uint32_t c)
    {
        auto &s = comps_[c];
        if (s.suspended)
        {
            return;
        }
        bool unblocked = false;
        while (!s.outgoing.empty())
        {
            const OutEntry &head = s.outgoing.front();
            auto &link = links_[head.link];
            if (link.busy)
            {
                break;
            }
            link.busy = true;
            ++link.sent;
            link.in_flight.push_back(head.tuple);
            push(now_ + link.transfer_ns, EventKind::TransmitComplete, head.link);
            push(now_ + link.transfer_ns + link.latency_ns, EventKind::LinkArrival, head.link);
            ++s.counters.tuples_out;
            s.outgoing.pop_front();
            if (s.pending_outputs > 0 && try_flush_outputs(c))
            {
                unblocked = true;
            }
        }
        if (unblocked)
        {
            try_start_service(c);
        }
    }

    void SimEngine::on_transmit_complete(std::uint32_t link)
    {
        links_[link].busy = false;
        if (trace_)
            trace(EventKind::TransmitComplete, links_[link].from, "to=" + spec_.components[links_[link].to].id);
        dispatch(links_[link].from);
    }

    void SimEngine::on_link_arrival(std::uint32_t link)
    {
        auto &l = links_[link];
        TupleRecord t = l.in_flight.front();
        l.in_flight.pop_front();
        ++l.arrived;
        auto &d = comps_[l.to];
        d.incoming.push_back(t);
        ++d.counters.tuples_in;
        d.max_incoming = std::max(d.max_incoming, d.incoming.size());
        if (trace_)
            trace(EventKind::LinkArrival, l.to,
                  "from=" + spec_.components[l.from].id + " tuple=" + std::to_string(t.id) +
                      " q=" + std::to_string(d.incoming.size()));
        if (d.incoming.size() > d.capacity && !d.in_backpressure)
        {
            enter_backpressure(l.to);
        }
        try_start_service(l.to);
    }

    void SimEngine::apply_penalty(std::uint32_t c)
    {
        if (penalty_ns_ == 0)
        {
            return;
        }
        auto &s = comps_[c];
        if (s.busy)
        {
            s.busy_until += penalty_ns_;
            push(s.busy_until, EventKind::ServiceCompletion, c, ++s.service_token);
        }
        else
        {
            s.stall_until = std::max(s.stall_until, now_) + penalty_ns_;
        }
    }

    void SimEngine::enter_backpressure(std::uint32_t c)
    {
        auto &s = comps_[c];
        s.in_backpressure = true;
        ++s.counters.bp_entries;
        update_bp_activity(s);
        push(now_ + control_ns_, EventKind::BpEnterSignal, c, 0, c, 0);
        ++control_in_flight_;
        if (trace_)
            trace(EventKind::BpEnterSignal, c, "emit q=" + std::to_string(s.incoming.size()));
        apply_penalty(c);
        if (config_.status_refresh)
        {
            push(now_ + poll_ns_, EventKind::BpPoll, c, ++s.refresh_token, c, 2);
        }
    }

    void SimEngine::exit_backpressure(std::uint32_t c)
    {
        auto &s = comps_[c];
        s.in_backpressure = false;
        ++s.refresh_token;
        update_bp_activity(s);
        push(now_ + control_ns_, EventKind::BpExitSignal, c, 0, c, 0);
        ++control_in_flight_;
        if (trace_)
            trace(EventKind::BpExitSignal, c, "emit q=" + std::to_string(s.incoming.size()));
        apply_penalty(c);
    }

    void SimEngine::on_control(const Event &ev)
    {
        --control_in_flight_;
        const bool enter = ev.kind == EventKind::BpEnterSignal;
        if (ev.stage == 0)
        {
            // At the Nimbus: fan the status out to the upstream set.
            for (auto t : suspend_targets_[ev.origin])
            {
                push(now_ + control_ns_, ev.kind, t, 0, ev.origin, 1);
                ++control_in_flight_;
            }
            if (trace_)
                trace_(TraceRecord{now_, ev.kind, "nimbus", "origin=" + spec_.components[ev.origin].id});
            return;
        }

        auto &s = comps_[ev.target];
        if (enter)
        {
            ++s.suspend_votes[ev.origin];
            ++s.suspend_total;
            if (!s.suspended)
            {
                s.suspended = true;
                s.suspended_since = now_;
                update_bp_activity(s);
            }
            if (s.poll_scheduled)
            {
                ++s.poll_token;
                s.poll_scheduled = false;
            }
        }
        else if (s.suspend_votes[ev.origin] > 0)
        {
            --s.suspend_votes[ev.origin];
            --s.suspend_total;
            if (s.suspend_total == 0 && s.suspended && !s.poll_scheduled)
            {
                const SimTime elapsed = now_ - s.suspended_since;
                const SimTime next = s.suspended_since + (elapsed / poll_ns_ + 1) * poll_ns_;
                s.poll_scheduled = true;
                push(next, EventKind::BpPoll, ev.target, ++s.poll_token);
            }
        }
        if (trace_)
            trace(ev.kind, ev.target, "origin=" + spec_.components[ev.origin].id);
    }

    void SimEngine::on_poll(std::uint32_t c)
    {
        auto &s = comps_[c];
        s.poll_scheduled = false;
        if (s.suspend_total != 0 || !s.suspended)
        {
            return;
        }
        s.suspended = false;
        update_bp_activity(s);
        if (trace_)
            trace(EventKind::BpPoll, c, "resume");
        dispatch(c);
        try_start_service(c);
    }

    void SimEngine::on_refresh(std::uint32_t c)
    {
        auto &s = comps_[c];
        if (!s.in_backpressure)
        {
            return;
        }
        if (trace_)
            trace(EventKind::BpPoll, c, "refresh q=" + std::to_string(s.incoming.size()));
        apply_penalty(c);
        push(now_ + poll_ns_, EventKind::BpPoll, c, s.refresh_token, c, 2);
    }

    void SimEngine::update_bp_activity(ComponentRuntime &comp)
    {
        const bool active = comp.suspended || comp.in_backpressure;
        if (active && !comp.bp_active)
        {
            comp.bp_active = true;
            comp.bp_since = now_;
        }
        else if (!active && comp.bp_active)
        {
            comp.bp_active = false;
            comp.counters.bp_time_ns += now_ - comp.bp_since;
        }
    }

    ComponentCounters SimEngine::counters(std::size_t c) const
    {
        const auto &s = comps_.at(c);
        ComponentCounters out = s.counters;
        if (s.bp_active)
        {
            out.bp_time_ns += now_ - s.bp_since;
        }
        return out;
    }

    CountersSnapshot SimEngine::snapshot_counters() const
    {
        CountersSnapshot snap;
        snap.time = now_;
        snap.components.reserve(comps_.size());
        snap.rates.reserve(comps_.size());
        for (std::size_t i = 0; i < comps_.size(); ++i)
        {
            snap.components.push_back(counters(i));
            snap.rates.push_back(comps_[i].rate);
        }
        return snap;
    }

    std::string SimEngine::describe_state() const
    {
        std::ostringstream os;
        os.precision(17);
        os << "now=" << now_ << " seq=" << seq_ << " next_tuple=" << next_tuple_id_ << " halted=" << halted_
           << " control_in_flight=" << control_in_flight_ << '\n';
        for (std::size_t i = 0; i < comps_.size(); ++i)
        {
            const auto &s = comps_[i];
            const auto c = counters(i);
            os << spec_.components[i].id << " kind=" << to_string(s.kind) << " cap=" << s.capacity
               << " in=" << s.incoming.size() << " out=" << s.outgoing.size() << " busy=" << s.busy
               << " busy_until=" << s.busy_until << " pending=" << s.pending_outputs << " acc=" << s.selectivity_acc
               << " bp=" << s.in_backpressure << " suspended=" << s.suspended << " votes=" << s.suspend_total
               << " rate=" << s.rate.base_rate << '*' << s.rate.fluctuation_multiplier << '*'
               << s.rate.throttle_fraction << " counters=" << c.tuples_in << ',' << c.tuples_out << ','
               << c.tuples_processed << ',' << c.copies_enqueued << ',' << c.forgone << ',' << c.bp_time_ns << ','
               << c.latency_sum_ns << ',' << c.bp_entries << '\n';
            os << "  incoming:";
            for (const auto &t : s.incoming)
                os << ' ' << t.id << '@' << t.created_at;
            os << "\n  outgoing:";
            for (const auto &e : s.outgoing)
                os << ' ' << e.tuple.id << '>' << e.link;
            os << '\n';
        }
        for (std::size_t i = 0; i < links_.size(); ++i)
        {
            const auto &l = links_[i];
            os << "link " << i << ' ' << spec_.components[l.from].id << "->" << spec_.components[l.to].id
               << " busy=" << l.busy << " sent=" << l.sent << " arrived=" << l.arrived << " wire:";
            for (const auto &t : l.in_flight)
                os << ' ' << t.id;
            os << '\n';
        }
        auto pending = events_;
        os << "events:";
        while (!pending.empty())
        {
            const auto &e = pending.top();
            os << ' ' << e.time << '/' << e.seq << '/' << to_string(e.kind) << '/' << e.target << '/' << e.token;
            pending.pop();
        }
        os << '\n';
        return os.str();
    }
} // namespace rcsim
