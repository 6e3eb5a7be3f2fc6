#include "rcsim/plot.hpp"

#include "rcsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rcsim
{
    namespace
    {
        constexpr double kWidth = 720, kHeight = 420;
        constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
        const char *const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

        std::string escape(const std::string &s)
        {
            std::string out;
            for (char c : s)
            {
                switch (c)
                {
                case '<':
                    out += "&lt;";
                    break;
                case '>':
                    out += "&gt;";
                    break;
                case '&':
                    out += "&amp;";
                    break;
                default:
                    out += c;
                }
            }
            return out;
        }

        std::string fmt(double v)
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4g", v);
            return buf;
        }

        std::vector<std::string> split(const std::string &line)
        {
            std::vector<std::string> cells;
            std::stringstream ss(line);
            for (std::string c; std::getline(ss, c, ',');)
                cells.push_back(c);
            return cells;
        }

        void write_file(const std::string &path, const std::string &content)
        {
            std::ofstream f(path, std::ios::binary);
            if (!f)
                throw std::runtime_error("cannot write " + path);
            f << content;
        }
    } // namespace

    std::string svg_line_chart(const std::string &title, const std::string &x_label, const std::string &y_label,
                               const std::vector<Series> &series)
    {
        double x0 = INFINITY, x1 = -INFINITY, y0 = 0.0, y1 = -INFINITY;
        for (const auto &s : series)
        {
            for (double x : s.x)
            {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
            for (double y : s.y)
            {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
        }
        if (!std::isfinite(x0))
        {
            x0 = 0;
            x1 = 1;
        }
        if (!std::isfinite(y1))
            y1 = 1;
        if (x1 == x0)
            x1 = x0 + 1;
        if (y1 == y0)
            y1 = y0 + 1;
        const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
        auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
        auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

        std::ostringstream o;
        o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
          << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
        o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
          << "</text>\n";
        o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
          << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int i = 0; i <= 4; ++i)
        {
            const double yv = y0 + (y1 - y0) * i / 4.0;
            const double xv = x0 + (x1 - x0) * i / 4.0;
            o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
              << "\" stroke=\"#ddd\"/>\n";
            o << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv)
              << "</text>\n";
            o << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << fmt(xv)
              << "</text>\n";
        }
        o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">"
          << escape(x_label) << "</text>\n";
        o << "<text transform=\"translate(16," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
          << escape(y_label) << "</text>\n";
        for (std::size_t i = 0; i < series.size(); ++i)
        {
            const auto &s = series[i];
            const char *color = kColors[i % std::size(kColors)];
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t j = 0; j < std::min(s.x.size(), s.y.size()); ++j)
                o << fmt(px(s.x[j])) << ',' << fmt(py(s.y[j])) << ' ';
            o << "\"/>\n";
            o << "<text x=\"" << kLeft + 10 << "\" y=\"" << kTop + 16 + 16 * i << "\" fill=\"" << color << "\">"
              << escape(s.label) << "</text>\n";
        }
        o << "</svg>\n";
        return o.str();
    }

    std::vector<std::string> plot_csv(const std::string &in_path, const std::string &out_stem)
    {
        std::ifstream in(in_path);
        if (!in)
        {
            throw std::runtime_error("cannot open " + in_path);
        }
        std::string header;
        std::getline(in, header);
        std::vector<std::string> written;

        if (header == csv_header())
        {
            Series thr{"throughput", {}, {}}, lat{"mean latency", {}, {}};
            for (std::string line; std::getline(in, line);)
            {
                auto c = split(line);
                if (c.size() != 5 || c[0] == "summary")
                    continue;
                const double w = std::stod(c[0]);
                thr.x.push_back(w);
                thr.y.push_back(std::stod(c[1]));
                lat.x.push_back(w);
                lat.y.push_back(std::stod(c[2]));
            }
            written.push_back(out_stem + "_throughput.svg");
            write_file(written.back(), svg_line_chart("Throughput", "window", "tuples/s", {thr}));
            written.push_back(out_stem + "_latency.svg");
            write_file(written.back(), svg_line_chart("End-to-end latency", "window", "seconds", {lat}));
            return written;
        }
        if (header == "iteration,topology,mean_step_reward")
        {
            std::map<std::string, Series> by_topology;
            for (std::string line; std::getline(in, line);)
            {
                auto c = split(line);
                if (c.size() != 3)
                    continue;
                auto &s = by_topology[c[1]];
                s.label = c[1];
                s.x.push_back(std::stod(c[0]));
                s.y.push_back(std::stod(c[2]));
            }
            std::vector<Series> all;
            for (auto &[_, s] : by_topology)
                all.push_back(std::move(s));
            written.push_back(out_stem + "_reward.svg");
            write_file(written.back(), svg_line_chart("Training reward", "iteration", "mean step reward", all));
            return written;
        }
        throw std::runtime_error("unrecognized CSV header in " + in_path + ": " + header);
    }
} // namespace rcsim
