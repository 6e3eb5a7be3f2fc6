#include "rcsim/metrics.hpp"

#include <stdexcept>

namespace rcsim
{
    namespace
    {
        double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

        // Fluid arrival rates given each source's generation capacity.
        std::vector<double> nominal_arrivals(const TopologySpec &spec, const std::vector<SourceRateState> &rates)
        {
            const std::size_t n = spec.components.size();
            std::vector<double> arrivals(n, 0.0);
            for (const auto &id : topological_order(spec))
            {
                const std::size_t u = *spec.index_of(id);
                const auto &c = spec.components[u];
                double out = 0.0;
                if (c.kind == ComponentKind::Source)
                    out = rates[u].generation_capacity();
                else if (c.kind == ComponentKind::Operator)
                    out = arrivals[u] * c.selectivity.value_or(1.0);
                for (const auto &l : spec.links)
                    if (l.from == c.id)
                        arrivals[*spec.index_of(l.to)] += out;
            }
            return arrivals;
        }
    } // namespace

    const ComponentMetrics &MetricsWindow::at(std::string_view id) const
    {
        for (const auto &c : components)
            if (c.id == id)
                return c;
        throw std::out_of_range("unknown component in window: " + std::string(id));
    }

    MetricsWindow window_between(const TopologySpec &spec, const CountersSnapshot &begin, const CountersSnapshot &end)
    {
        if (end.time < begin.time || begin.components.size() != spec.components.size() ||
            end.components.size() != spec.components.size())
        {
            throw std::invalid_argument("snapshots do not describe a window of this topology");
        }
        MetricsWindow w;
        w.start = begin.time;
        w.end = end.time;
        w.k = ns_to_seconds(end.time - begin.time);

        const auto arrivals = nominal_arrivals(spec, end.rates);
        std::vector<std::size_t> out_degree(spec.components.size(), 0);
        for (const auto &l : spec.links)
            ++out_degree[*spec.index_of(l.from)];

        for (std::size_t i = 0; i < spec.components.size(); ++i)
        {
            const auto &cs = spec.components[i];
            ComponentCounters d = end.components[i];
            d -= begin.components[i];

            ComponentMetrics m;
            m.id = cs.id;
            m.kind = cs.kind;
            m.bk = ns_to_seconds(d.bp_time_ns);
            switch (cs.kind)
            {
            case ComponentKind::Source:
                m.r_g = end.rates[i].generation_capacity();
                m.r_c = end.rates[i].current_rate();
                m.out = d.tuples_out;
                m.max_out = cs.queue_capacity;
                m.nominal_out_rate = m.r_g * static_cast<double>(out_degree[i]);
                break;
            case ComponentKind::Operator:
                m.in = d.tuples_in;
                m.out = d.tuples_out;
                m.max_in = cs.queue_capacity;
                m.max_out = cs.queue_capacity;
                m.nominal_in_rate = arrivals[i];
                m.nominal_out_rate =
                    arrivals[i] * cs.selectivity.value_or(1.0) * static_cast<double>(out_degree[i]);
                break;
            case ComponentKind::Sink:
                m.in = d.tuples_in;
                m.max_in = cs.queue_capacity;
                m.latency_sum = ns_to_seconds(d.latency_sum_ns);
                m.processed = d.tuples_processed;
                m.nominal_in_rate = arrivals[i];
                break;
            }
            w.components.push_back(std::move(m));
        }
        return w;
    }

    MetricsWindow WindowCollector::collect(const SimEngine &engine)
    {
        auto now = engine.snapshot_counters();
        auto w = window_between(engine.spec(), last_, now);
        last_ = std::move(now);
        return w;
    }

    double throughput(const MetricsWindow &window)
    {
        if (!(window.k > 0.0))
        {
            return 0.0;
        }
        double processed = 0.0;
        for (const auto &c : window.components)
            if (c.kind == ComponentKind::Sink)
                processed += static_cast<double>(c.processed);
        return processed / window.k;
    }

    double mean_latency(const MetricsWindow &window)
    {
        double sum = 0.0;
        std::uint64_t count = 0;
        for (const auto &c : window.components)
        {
            if (c.kind == ComponentKind::Sink)
            {
                sum += c.latency_sum;
                count += c.processed;
            }
        }
        return count == 0 ? 0.0 : sum / static_cast<double>(count);
    }

    double bp_time_total(const MetricsWindow &window)
    {
        double total = 0.0;
        for (const auto &c : window.components)
            total += c.bk;
        return total;
    }

    ThroughputReport report(const MetricsWindow &window)
    {
        return ThroughputReport{throughput(window), mean_latency(window), bp_time_total(window)};
    }

    NodeFeatures node_features(const MetricsWindow &window, std::string_view id, const FeatureScale &scale)
    {
        const auto &m = window.at(id);
        const double k = window.k;
        NodeFeatures f{};
        switch (m.kind)
        {
        case ComponentKind::Source:
            f[0] = 1.0;
            f[3] = safe_ratio(m.r_g, scale.max_rate);
            f[4] = safe_ratio(m.r_c, m.r_g);
            f[5] = safe_ratio(m.bk, k);
            f[6] = safe_ratio(static_cast<double>(m.out), m.nominal_out_rate * k);
            f[7] = static_cast<double>(m.max_out) / scale.ref_capacity;
            break;
        case ComponentKind::Operator:
            f[1] = 1.0;
            f[3] = safe_ratio(static_cast<double>(m.in), m.nominal_in_rate * k);
            f[4] = safe_ratio(static_cast<double>(m.out), m.nominal_out_rate * k);
            f[5] = static_cast<double>(m.max_out) / scale.ref_capacity;
            f[6] = static_cast<double>(m.max_in) / scale.ref_capacity;
            f[7] = safe_ratio(m.bk, k);
            break;
        case ComponentKind::Sink:
            f[2] = 1.0;
            f[3] = safe_ratio(m.bk, k);
            f[4] = safe_ratio(static_cast<double>(m.in), m.nominal_in_rate * k);
            f[5] = static_cast<double>(m.max_in) / scale.ref_capacity;
            f[6] = safe_ratio(m.latency_sum, static_cast<double>(m.processed) * k);
            f[7] = safe_ratio(static_cast<double>(m.processed), m.nominal_in_rate * k);
            break;
        }
        return f;
    }

    EdgeFeatures edge_features(const LinkSpec &link, const FeatureScale &scale)
    {
        return {link.bandwidth / scale.ref_bandwidth, link.latency / scale.ref_latency};
    }

    std::string csv_header() { return "window_index,thr,mean_latency,bp_time_total,action"; }

    std::string csv_row(std::size_t window_index, const ThroughputReport &r, int action)
    {
        return std::to_string(window_index) + "," + format_real(r.thr) + "," + format_real(r.mean_latency) + "," +
               format_real(r.bp_time_total) + "," + std::to_string(action);
    }
} // namespace rcsim
