#include "rcsim/baselines.hpp"

#include "rcsim/environment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rcsim
{
    namespace
    {
        std::size_t window_count(double duration, double k)
        {
            if (!(k > 0.0) || !(duration > 0.0))
            {
                throw std::invalid_argument("duration and K must be positive");
            }
            const double n = std::round(duration / k);
            if (n < 1.0 || std::abs(n * k - duration) > 1e-9 * std::max(1.0, duration))
            {
                throw std::invalid_argument("duration must be a whole number of windows");
            }
            return static_cast<std::size_t>(n);
        }

        int fraction_to_action(double fraction)
        {
            return static_cast<int>(std::lround(fraction * 10.0)) - 1;
        }

        std::string fraction_label(double fraction)
        {
            return fraction == 1.0 ? "default" : "static-" + format_real(fraction);
        }

        RunReport run_windows(const TopologySpec &spec, double duration, std::uint64_t seed, const RunOptions &opts,
                              const std::function<int(std::size_t)> &action_at, std::string label)
        {
            require_valid(spec);
            const std::size_t n = window_count(duration, opts.k_s);
            SimEngine engine(spec, seed, opts.engine);
            if (opts.trace)
                engine.set_trace_sink(opts.trace);
            WindowCollector collector(engine);

            RunReport r;
            r.topology = spec.name;
            r.controller = std::move(label);
            r.duration = duration;
            r.k = opts.k_s;
            double processed = 0.0;
            double latency_sum = 0.0;
            for (std::size_t w = 0; w < n; ++w)
            {
                const int action = action_at(w);
                engine.set_throttle(action_to_fraction(action));
                engine.advance(opts.k_s);
                auto window = collector.collect(engine);
                auto rep = report(window);
                r.thr_series.push_back(rep.thr);
                r.latency_series.push_back(rep.mean_latency);
                r.bp_series.push_back(rep.bp_time_total);
                r.actions.push_back(action);
                r.bp_time_total += rep.bp_time_total;
                for (const auto &c : window.components)
                {
                    if (c.kind == ComponentKind::Sink)
                    {
                        processed += static_cast<double>(c.processed);
                        latency_sum += c.latency_sum;
                    }
                }
            }
            r.thr_mean = processed / duration;
            r.latency_mean = processed > 0.0 ? latency_sum / processed : 0.0;
            return r;
        }

        double pct(double num, double den) { return den != 0.0 ? 100.0 * num / den : 0.0; }
    } // namespace

    RunReport run_fixed(const TopologySpec &spec, double fraction, double duration, std::uint64_t seed,
                        const RunOptions &opts)
    {
        if (!is_valid_fraction(fraction))
        {
            throw std::invalid_argument("fraction must be one of 0.1, 0.2, ..., 1.0");
        }
        const int action = fraction_to_action(fraction);
        return run_windows(
            spec, duration, seed, opts, [action](std::size_t) { return action; }, fraction_label(fraction));
    }

    RunReport run_default(const TopologySpec &spec, double duration, std::uint64_t seed, const RunOptions &opts)
    {
        return run_fixed(spec, 1.0, duration, seed, opts);
    }

    RunReport run_script(const TopologySpec &spec, const std::vector<int> &actions, double duration,
                         std::uint64_t seed, const RunOptions &opts)
    {
        if (actions.empty())
        {
            throw std::invalid_argument("empty action script");
        }
        for (int a : actions)
            if (a < 0 || a > 9)
                throw std::invalid_argument("script action outside 0..9: " + std::to_string(a));
        return run_windows(
            spec, duration, seed, opts,
            [&actions](std::size_t w) { return actions[std::min(w, actions.size() - 1)]; }, "script");
    }

    SweepResult sweep_static(const TopologySpec &spec, double duration, std::uint64_t seed, const RunOptions &opts,
                             unsigned threads)
    {
        require_valid(spec);
        window_count(duration, opts.k_s);
        SweepResult s;
        s.runs.resize(kActionCount);
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mu;
        auto worker = [&] {
            for (int a = next.fetch_add(1); a < kActionCount; a = next.fetch_add(1))
            {
                try
                {
                    s.runs[a] = run_fixed(spec, action_to_fraction(a), duration, seed, opts);
                }
                catch (...)
                {
                    std::lock_guard lock(failure_mu);
                    failure = std::current_exception();
                }
            }
        };
        threads = std::max(1u, std::min<unsigned>(threads, kActionCount));
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < threads; ++t)
            pool.emplace_back(worker);
        worker();
        for (auto &t : pool)
            t.join();
        if (failure)
            std::rethrow_exception(failure);

        for (std::size_t a = 1; a < s.runs.size(); ++a)
        {
            const auto &cand = s.runs[a];
            const auto &best = s.runs[s.best];
            if (cand.thr_mean > best.thr_mean ||
                (cand.thr_mean == best.thr_mean && cand.latency_mean < best.latency_mean))
            {
                s.best = a;
            }
        }
        return s;
    }

    Comparison compare(const RunReport &candidate, const RunReport &baseline)
    {
        if (candidate.topology != baseline.topology)
        {
            throw std::invalid_argument("topology mismatch: " + candidate.topology + " vs " + baseline.topology);
        }
        if (std::abs(candidate.duration - baseline.duration) > 1e-9)
        {
            throw std::invalid_argument("duration mismatch: " + format_real(candidate.duration) + " vs " +
                                        format_real(baseline.duration));
        }
        Comparison c;
        c.thr_gain_pct = pct(candidate.thr_mean - baseline.thr_mean, baseline.thr_mean);
        c.latency_drop_pct = pct(baseline.latency_mean - candidate.latency_mean, baseline.latency_mean);
        auto peak = [](const std::vector<double> &v) {
            double m = 0.0;
            for (double x : v)
                m = std::max(m, x);
            return m;
        };
        const double pb = peak(baseline.thr_series);
        c.peak_thr_gain_pct = pct(peak(candidate.thr_series) - pb, pb);
        return c;
    }

    void write_report_csv(std::ostream &out, const RunReport &r)
    {
        out << csv_header() << '\n';
        for (std::size_t w = 0; w < r.thr_series.size(); ++w)
        {
            out << csv_row(w, ThroughputReport{r.thr_series[w], r.latency_series[w], r.bp_series[w]}, r.actions[w])
                << '\n';
        }
        int summary_action = r.actions.empty() ? -1 : r.actions.front();
        for (int a : r.actions)
            if (a != summary_action)
                summary_action = -1;
        out << "summary," << format_real(r.thr_mean) << ',' << format_real(r.latency_mean) << ','
            << format_real(r.bp_time_total) << ',' << summary_action << '\n';
    }

    RunReport read_report_csv(std::istream &in)
    {
        std::string line;
        if (!std::getline(in, line) || line != csv_header())
        {
            throw std::invalid_argument("missing CSV header: " + csv_header());
        }
        RunReport r;
        bool summary = false;
        std::size_t lineno = 1;
        while (std::getline(in, line))
        {
            ++lineno;
            if (line.empty())
                continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');)
                cells.push_back(cell);
            if (cells.size() != 5)
            {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 5 columns");
            }
            try
            {
                if (cells[0] == "summary")
                {
                    r.thr_mean = std::stod(cells[1]);
                    r.latency_mean = std::stod(cells[2]);
                    r.bp_time_total = std::stod(cells[3]);
                    summary = true;
                    continue;
                }
                r.thr_series.push_back(std::stod(cells[1]));
                r.latency_series.push_back(std::stod(cells[2]));
                r.bp_series.push_back(std::stod(cells[3]));
                r.actions.push_back(std::stoi(cells[4]));
            }
            catch (const std::logic_error &)
            {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": bad number");
            }
        }
        if (!summary)
        {
            double sum = 0.0;
            for (double t : r.thr_series)
                sum += t;
            r.thr_mean = r.thr_series.empty() ? 0.0 : sum / static_cast<double>(r.thr_series.size());
        }
        r.duration = static_cast<double>(r.thr_series.size());
        return r;
    }

    void write_sweep_csv(std::ostream &out, const SweepResult &sweep)
    {
        out << "fraction,thr_mean,latency_mean,bp_time_total\n";
        for (std::size_t a = 0; a < sweep.runs.size(); ++a)
        {
            const auto &r = sweep.runs[a];
            out << format_real(action_to_fraction(static_cast<int>(a))) << ',' << format_real(r.thr_mean) << ','
                << format_real(r.latency_mean) << ',' << format_real(r.bp_time_total) << '\n';
        }
        out << "best," << format_real(sweep.best_fraction()) << '\n';
    }
} // namespace rcsim
