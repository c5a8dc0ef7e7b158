#include "ecx/diagnostics.hpp"

#include "ecx/error.hpp"
#include "ecx/textio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace ecx {

// ---------------------------------------------------------------------------
// triangularity ordering

OrderedMatrixView order_for_triangularity(const InputMatrix& m, const Eigen::VectorXd* region_employment,
                                          const Eigen::VectorXd* industry_employment)
{
    const Eigen::VectorXd diversity = m.values.rowwise().sum();
    const Eigen::VectorXd ubiquity = m.values.colwise().sum().transpose();
    if (region_employment && region_employment->size() != m.values.rows()) {
        throw ConfigError("region employment vector does not match the matrix");
    }
    if (industry_employment && industry_employment->size() != m.values.cols()) {
        throw ConfigError("industry employment vector does not match the matrix");
    }

    OrderedMatrixView view;
    view.strategy = m.strategy;
    view.region_order.resize(static_cast<std::size_t>(m.values.rows()));
    view.industry_order.resize(static_cast<std::size_t>(m.values.cols()));
    std::iota(view.region_order.begin(), view.region_order.end(), std::size_t{0});
    std::iota(view.industry_order.begin(), view.industry_order.end(), std::size_t{0});

    auto at = [](const Eigen::VectorXd& v, std::size_t i) { return v(static_cast<Eigen::Index>(i)); };
    std::stable_sort(view.region_order.begin(), view.region_order.end(), [&](std::size_t a, std::size_t b) {
        if (at(diversity, a) != at(diversity, b)) return at(diversity, a) < at(diversity, b);
        if (region_employment) return at(*region_employment, a) < at(*region_employment, b);
        return false;
    });
    std::stable_sort(view.industry_order.begin(), view.industry_order.end(), [&](std::size_t a, std::size_t b) {
        if (at(ubiquity, a) != at(ubiquity, b)) return at(ubiquity, a) > at(ubiquity, b);
        if (industry_employment) return at(*industry_employment, a) > at(*industry_employment, b);
        return false;
    });

    const auto nr = static_cast<Eigen::Index>(view.region_order.size());
    const auto ni = static_cast<Eigen::Index>(view.industry_order.size());
    view.values.resize(nr, ni);
    view.diversity.resize(nr);
    view.ubiquity.resize(ni);
    for (Eigen::Index r = 0; r < nr; ++r) {
        const auto src_r = static_cast<Eigen::Index>(view.region_order[static_cast<std::size_t>(r)]);
        view.diversity(r) = diversity(src_r);
        for (Eigen::Index c = 0; c < ni; ++c) {
            view.values(r, c) = m.values(src_r, static_cast<Eigen::Index>(view.industry_order[static_cast<std::size_t>(c)]));
        }
    }
    for (Eigen::Index c = 0; c < ni; ++c) view.ubiquity(c) = ubiquity(static_cast<Eigen::Index>(view.industry_order[static_cast<std::size_t>(c)]));
    if (m.regions.size() == view.region_order.size()) view.regions = m.regions.subset(view.region_order);
    if (m.industries.size() == view.industry_order.size()) view.industries = m.industries.subset(view.industry_order);
    return view;
}

bool is_lower_triangular_staircase(const Eigen::MatrixXd& values)
{
    Eigen::Index prev_width = 0;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        Eigen::Index width = 0;
        while (width < values.cols() && values(r, width) != 0) ++width;
        for (Eigen::Index c = width; c < values.cols(); ++c) {
            if (values(r, c) != 0) return false;
        }
        if (width == 0 || width < prev_width) return false;
        prev_width = width;
    }
    return true;
}

// ---------------------------------------------------------------------------
// heatmap export

HeatmapFormat parse_heatmap_format(std::string_view name)
{
    if (name == "svg") return HeatmapFormat::svg;
    if (name == "csv" || name == "triplet-csv") return HeatmapFormat::triplet_csv;
    throw ConfigError("unknown heatmap format '" + std::string(name) + "' (expected svg or triplet-csv)");
}

double display_value(Strategy strategy, double value)
{
    constexpr double kLqTopCode = 10.0;
    if (strategy == Strategy::RLQ) return std::min(value, kLqTopCode);
    return value;
}

std::string heatmap_svg(const OrderedMatrixView& view)
{
    const auto nr = view.values.rows();
    const auto ni = view.values.cols();
    double max_display = 0;
    for (Eigen::Index r = 0; r < nr; ++r) {
        for (Eigen::Index c = 0; c < ni; ++c) max_display = std::max(max_display, display_value(view.strategy, view.values(r, c)));
    }
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << nr << "\" height=\"" << ni
        << "\" viewBox=\"0 0 " << nr << ' ' << ni << "\" shape-rendering=\"crispEdges\">\n"
        << "<title>" << to_string(view.strategy) << ": regions by diversity (x), industries by ubiquity (y)</title>\n";
    for (Eigen::Index r = 0; r < nr; ++r) {
        for (Eigen::Index c = 0; c < ni; ++c) {
            const double v = view.values(r, c);
            if (v == 0) continue;
            const double level = max_display > 0 ? display_value(view.strategy, v) / max_display : 0.0;
            const int grey = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(level, 0.0, 1.0))));
            svg << "<rect x=\"" << r << "\" y=\"" << (ni - 1 - c) << "\" width=\"1\" height=\"1\" fill=\"rgb(" << grey
                << ',' << grey << ',' << grey << ")\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string heatmap_triplets_csv(const OrderedMatrixView& view)
{
    std::string out = "row_rank,col_rank,value\n";
    for (Eigen::Index r = 0; r < view.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < view.values.cols(); ++c) {
            const double v = view.values(r, c);
            if (v == 0) continue;
            out += std::to_string(r);
            out += ',';
            out += std::to_string(c);
            out += ',';
            out += format_double(v);
            out += '\n';
        }
    }
    return out;
}

Eigen::MatrixXd parse_heatmap_triplets(std::string_view text, Eigen::Index rows, Eigen::Index cols)
{
    auto table = parse_delimited(text, ',', true);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.size() != 3) throw SchemaError("heatmap triplet line " + std::to_string(table.line_numbers[i]));
        auto r = parse_int(row[0]);
        auto c = parse_int(row[1]);
        auto v = parse_double(row[2]);
        if (!r || !c || !v || *r < 0 || *c < 0 || *r >= rows || *c >= cols) {
            throw SchemaError("heatmap triplet line " + std::to_string(table.line_numbers[i]) + " out of range");
        }
        m(*r, *c) = *v;
    }
    return m;
}

void export_heatmap(const OrderedMatrixView& view, const std::filesystem::path& path, HeatmapFormat format)
{
    write_file(path, format == HeatmapFormat::svg ? heatmap_svg(view) : heatmap_triplets_csv(view));
}

// ---------------------------------------------------------------------------
// correlations

namespace {

ScoreSeries series(const Catalog& cat, const Eigen::VectorXd& v)
{
    ScoreSeries s;
    s.values.assign(v.data(), v.data() + v.size());
    if (cat.size() == static_cast<std::size_t>(v.size())) {
        s.codes = cat.codes();
    } else {
        for (Eigen::Index i = 0; i < v.size(); ++i) s.codes.push_back(std::to_string(i));
    }
    return s;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
    const auto n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0;
    double saa = 0;
    double sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0) || !(sbb > 0)) throw NumericError("correlation undefined: zero variance");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

ScoreSeries region_series(const ComplexityScores& s)
{
    return series(s.regions, s.region_scores);
}

ScoreSeries industry_series(const ComplexityScores& s)
{
    return series(s.industries, s.industry_scores);
}

AlignedPair align(const ScoreSeries& a, const ScoreSeries& b)
{
    std::unordered_map<std::string, std::size_t> b_index;
    for (std::size_t i = 0; i < b.codes.size(); ++i) b_index.emplace(b.codes[i], i);
    AlignedPair out;
    for (std::size_t i = 0; i < a.codes.size(); ++i) {
        auto it = b_index.find(a.codes[i]);
        if (it == b_index.end()) continue;
        out.codes.push_back(a.codes[i]);
        out.a.push_back(a.values[i]);
        out.b.push_back(b.values[it->second]);
    }
    out.dropped = (a.codes.size() - out.codes.size()) + (b.codes.size() - out.codes.size());
    return out;
}

std::vector<double> average_ranks(std::span<const double> x)
{
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double correlate(std::span<const double> a, std::span<const double> b, Transform transform_b, CorrelationKind kind)
{
    if (a.size() != b.size()) throw ConfigError("correlate: vectors have different lengths");
    if (a.size() < 3) throw ConfigError("correlate: need at least 3 aligned entities");
    std::vector<double> va(a.begin(), a.end());
    std::vector<double> vb(b.begin(), b.end());
    if (transform_b == Transform::log) {
        for (double& v : vb) {
            if (!(v > 0)) throw NumericError("correlate: log transform needs strictly positive values");
            v = std::log(v);
        }
    }
    if (kind == CorrelationKind::spearman) {
        va = average_ranks(va);
        vb = average_ranks(vb);
    }
    return pearson(va, vb);
}

// ---------------------------------------------------------------------------
// summaries

GroupSummary group_summary(const ScoreSeries& scores, const AttributeTable& attributes, const std::string& attribute)
{
    std::map<std::string, std::vector<double>> groups;
    for (std::size_t i = 0; i < scores.codes.size(); ++i) {
        groups[attributes.value(scores.codes[i], attribute).value_or("unclassified")].push_back(scores.values[i]);
    }
    GroupSummary out;
    out.grouping = attribute;
    for (const auto& [label, values] : groups) {
        GroupRow row;
        row.label = label;
        row.count = values.size();
        row.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0;
            for (double v : values) ss += (v - row.mean) * (v - row.mean);
            row.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

RankedTable top_bottom(const ScoreSeries& scores, std::size_t n, const AttributeTable* attributes,
                       const std::string& tag_attribute)
{
    if (n > scores.codes.size()) {
        throw ConfigError("top_bottom: asked for " + std::to_string(n) + " entries but only " +
                          std::to_string(scores.codes.size()) + " are scored");
    }
    std::vector<std::size_t> idx(scores.codes.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores.values[a] != scores.values[b]) return scores.values[a] > scores.values[b];
        return scores.codes[a] < scores.codes[b];
    });
    auto entry = [&](std::size_t pos) {
        const auto i = idx[pos];
        RankedEntry e;
        e.rank = pos + 1;
        e.code = scores.codes[i];
        e.score = scores.values[i];
        if (attributes) {
            e.label = attributes->value(e.code, "label").value_or("");
            e.tag = attributes->value(e.code, tag_attribute).value_or("");
        }
        return e;
    };
    RankedTable t;
    for (std::size_t k = 0; k < n; ++k) t.top.push_back(entry(k));
    for (std::size_t k = 0; k < n; ++k) t.bottom.push_back(entry(idx.size() - 1 - k));
    return t;
}

std::string group_summary_csv(const GroupSummary& g)
{
    std::string out = "group,count,mean,sd\n";
    for (const auto& r : g.rows) {
        out += quote_field(r.label) + "," + std::to_string(r.count) + "," + format_double(r.mean) + "," +
               format_double(r.sd) + "\n";
    }
    return out;
}

std::string group_summary_text(const GroupSummary& g)
{
    std::size_t width = std::max<std::size_t>(g.grouping.size(), 5);
    for (const auto& r : g.rows) width = std::max(width, r.label.size());
    std::ostringstream out;
    out << std::left;
    out.width(static_cast<std::streamsize>(width));
    out << g.grouping << "  " << "   count" << "      mean" << "        sd\n";
    for (const auto& r : g.rows) {
        out.width(static_cast<std::streamsize>(width));
        out << r.label << "  ";
        out.width(8);
        out << std::right << r.count;
        out.width(10);
        out << format_fixed(r.mean, 3);
        out.width(10);
        out << format_fixed(r.sd, 3) << std::left << '\n';
    }
    return out.str();
}

std::string ranked_table_csv(const RankedTable& t)
{
    std::string out = "end,rank,code,label,tag,score\n";
    auto emit = [&](const char* end, const std::vector<RankedEntry>& v) {
        for (const auto& e : v) {
            out += std::string(end) + "," + std::to_string(e.rank) + "," + quote_field(e.code) + "," + quote_field(e.label) +
                   "," + quote_field(e.tag) + "," + format_double(e.score) + "\n";
        }
    };
    emit("top", t.top);
    emit("bottom", t.bottom);
    return out;
}

std::string ranked_table_text(const RankedTable& t)
{
    std::ostringstream out;
    auto emit = [&](const char* title, const std::vector<RankedEntry>& v) {
        out << title << '\n';
        for (const auto& e : v) {
            out.width(5);
            out << std::right << e.rank << "  ";
            out.width(10);
            out << std::left << e.code << ' ';
            out.width(9);
            out << std::right << format_fixed(e.score, 3) << "  " << e.tag << (e.tag.empty() ? "" : "  ") << e.label
                << '\n';
        }
    };
    emit("most complex", t.top);
    emit("least complex", t.bottom);
    return out.str();
}

}  // namespace ecx
