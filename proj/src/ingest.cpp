#include "ecx/ingest.hpp"

#include "ecx/error.hpp"
#include "ecx/textio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ecx {

// ---------------------------------------------------------------------------
// parsing

namespace {

std::size_t require_column(const DelimitedTable& table, const std::string& name)
{
    auto col = table.column(name);
    if (!col) throw SchemaError("missing mandatory column '" + name + "'");
    return *col;
}

}  // namespace

ParseResult parse_employment_text(std::string_view text, const TableSchema& schema)
{
    ParseResult result;
    auto table = parse_delimited(text, schema.delimiter, true);
    if (table.header.empty() && table.rows.empty()) return result;

    std::optional<std::size_t> year_col;
    if (!schema.fixed_year) year_col = require_column(table, schema.year_column);
    if (schema.region_columns.empty()) throw SchemaError("schema names no region column");
    std::vector<std::size_t> region_cols;
    for (const auto& name : schema.region_columns) region_cols.push_back(require_column(table, name));
    const auto industry_col = require_column(table, schema.industry_column);
    const auto emp_col = require_column(table, schema.employment_column);
    const auto flag_col = require_column(table, schema.flag_column);

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.line_numbers[r];
        auto reject = [&](std::string reason) { result.rejects.push_back({line, std::move(reason)}); };
        auto field = [&](std::size_t col) -> std::string { return col < row.size() ? trim(row[col]) : std::string{}; };

        if (row.size() < table.header.size()) {
            // Trailing empty fields may be omitted, but nothing before the last mandatory column.
            std::size_t needed = std::max({industry_col, emp_col, year_col.value_or(0)}) + 1;
            for (auto c : region_cols) needed = std::max(needed, c + 1);
            if (row.size() < needed) {
                reject("expected " + std::to_string(table.header.size()) + " fields, got " + std::to_string(row.size()));
                continue;
            }
        }

        RawEmploymentRecord rec;
        if (year_col) {
            auto y = parse_int(field(*year_col));
            if (!y) {
                reject("unparseable year '" + field(*year_col) + "'");
                continue;
            }
            rec.year = static_cast<int>(*y);
        } else {
            rec.year = *schema.fixed_year;
        }
        if (rec.year < schema.first_year || rec.year > schema.last_year) {
            reject("year " + std::to_string(rec.year) + " outside " + std::to_string(schema.first_year) + "-" +
                   std::to_string(schema.last_year));
            continue;
        }

        for (auto c : region_cols) rec.region_code += field(c);
        rec.industry_code = field(industry_col);
        if (rec.region_code.empty() || rec.industry_code.empty()) {
            reject("empty region or industry code");
            continue;
        }
        if (!schema.rollup_markers.empty() &&
            rec.industry_code.find_first_of(schema.rollup_markers) != std::string::npos) {
            ++result.skipped;
            continue;
        }

        const std::string count_text = field(emp_col);
        const std::string flag_text = field(flag_col);
        std::optional<std::int64_t> count;
        if (!count_text.empty()) {
            count = parse_int(count_text);
            if (!count) {
                reject("unparseable employment '" + count_text + "'");
                continue;
            }
            if (*count < 0) {
                reject("negative employment " + count_text);
                continue;
            }
        }
        if (count && !flag_text.empty()) {
            if (schema.zero_count_with_flag_is_suppressed && *count == 0) {
                count.reset();
            } else {
                reject("both employment count and suppression flag present");
                continue;
            }
        }
        if (!count && flag_text.empty()) {
            reject("neither employment count nor suppression flag present");
            continue;
        }
        if (count) {
            rec.employment = count;
        } else {
            rec.suppression_flag = flag_text;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

ParseResult parse_employment_table(const std::filesystem::path& file, const TableSchema& schema)
{
    return parse_employment_text(read_file(file), schema);
}

// ---------------------------------------------------------------------------
// size classes

SizeClassTable::SizeClassTable(std::vector<SizeClass> classes, std::string open_class_policy)
    : classes_(std::move(classes)), open_class_policy_(std::move(open_class_policy))
{
    std::set<std::string> flags;
    std::size_t open_count = 0;
    for (const auto& c : classes_) {
        if (c.flag.empty()) throw ConfigError("size class with empty flag");
        if (!flags.insert(c.flag).second) throw ConfigError("duplicate size class flag '" + c.flag + "'");
        if (!std::isfinite(c.imputed) || c.imputed < 0) {
            throw ConfigError("size class '" + c.flag + "' has negative or non-finite imputed value");
        }
        if (c.lower < 0) throw ConfigError("size class '" + c.flag + "' has negative lower bound");
        if (c.upper) {
            if (*c.upper < c.lower) throw ConfigError("size class '" + c.flag + "' has upper < lower");
            if (c.imputed < c.lower || c.imputed > *c.upper) {
                throw ConfigError("size class '" + c.flag + "' imputed value outside its bounds");
            }
        } else {
            ++open_count;
            if (c.imputed < c.lower) throw ConfigError("open size class '" + c.flag + "' imputed below its lower bound");
        }
    }
    if (open_count > 1) throw ConfigError("more than one open-ended size class");

    std::vector<const SizeClass*> order;
    for (const auto& c : classes_) order.push_back(&c);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->lower < b->lower; });
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto* a = order[i];
        const auto* b = order[i + 1];
        if (!a->upper) throw ConfigError("open-ended size class '" + a->flag + "' is not the top class");
        if (*a->upper >= b->lower) {
            throw ConfigError("size classes '" + a->flag + "' and '" + b->flag + "' overlap");
        }
    }
}

SizeClass SizeClassTable::midpoint_class(std::string flag, double lower, double upper)
{
    return SizeClass{std::move(flag), lower, upper, (lower + upper) / 2.0};
}

SizeClassTable SizeClassTable::cbp_default()
{
    std::vector<SizeClass> classes = {
        midpoint_class("A", 0, 19),
        midpoint_class("B", 20, 99),
        midpoint_class("C", 100, 249),
        midpoint_class("E", 250, 499),
        midpoint_class("F", 500, 999),
        midpoint_class("G", 1000, 2499),
        midpoint_class("H", 2500, 4999),
        midpoint_class("I", 5000, 9999),
        midpoint_class("J", 10000, 24999),
        midpoint_class("K", 25000, 49999),
        midpoint_class("L", 50000, 99999),
        SizeClass{"M", 100000, std::nullopt, 100000},
    };
    return SizeClassTable(std::move(classes), "open class M imputed at its lower bound 100000");
}

SizeClassTable SizeClassTable::load(const std::filesystem::path& path, char delim)
{
    auto table = read_delimited(path, delim, true);
    const auto flag = table.column("flag");
    const auto lower = table.column("lower");
    const auto upper = table.column("upper");
    const auto imputed = table.column("imputed");
    if (!flag || !lower || !upper || !imputed) {
        throw SchemaError(path.string() + ": size class table needs columns flag,lower,upper,imputed");
    }
    std::vector<SizeClass> classes;
    std::string policy;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto cell = [&](std::size_t c) { return c < row.size() ? trim(row[c]) : std::string{}; };
        const auto where = path.string() + ":" + std::to_string(table.line_numbers[r]);
        SizeClass sc;
        sc.flag = cell(*flag);
        auto lo = parse_double(cell(*lower));
        if (!lo) throw ConfigError(where + ": bad lower bound");
        sc.lower = *lo;
        if (!cell(*upper).empty()) {
            auto hi = parse_double(cell(*upper));
            if (!hi) throw ConfigError(where + ": bad upper bound");
            sc.upper = *hi;
        }
        if (cell(*imputed).empty()) {
            if (!sc.upper) throw ConfigError(where + ": open-ended class '" + sc.flag + "' needs an explicit imputed value");
            sc.imputed = (sc.lower + *sc.upper) / 2.0;
        } else {
            auto v = parse_double(cell(*imputed));
            if (!v) throw ConfigError(where + ": bad imputed value");
            sc.imputed = *v;
        }
        if (!sc.upper) {
            policy = "open class " + sc.flag + " imputed at " + format_double(sc.imputed) +
                     (sc.imputed == sc.lower ? " (its lower bound)" : "");
        }
        classes.push_back(std::move(sc));
    }
    return SizeClassTable(std::move(classes), std::move(policy));
}

const SizeClass* SizeClassTable::find(std::string_view flag) const
{
    for (const auto& c : classes_) {
        if (c.flag == flag) return &c;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// panel

std::vector<int> EmploymentPanel::years() const
{
    std::vector<int> out;
    for (const auto& r : records_) {
        if (out.empty() || out.back() != r.year) out.push_back(r.year);
    }
    return out;
}

double EmploymentPanel::total_employment() const
{
    double total = 0;
    for (const auto& r : records_) total += r.employment;
    return total;
}

double EmploymentPanel::total_imputed() const
{
    double total = 0;
    for (const auto& r : records_) total += r.imputed;
    return total;
}

std::size_t EmploymentPanel::imputed_cells() const
{
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](auto& r) { return r.is_imputed(); }));
}

bool EmploymentPanel::operator==(const EmploymentPanel& other) const
{
    if (!(regions_ == other.regions_) || !(industries_ == other.industries_)) return false;
    if (records_.size() != other.records_.size()) return false;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& a = records_[i];
        const auto& b = other.records_[i];
        if (a.year != b.year || a.region != b.region || a.industry != b.industry || a.employment != b.employment ||
            a.is_imputed() != b.is_imputed()) {
            return false;
        }
    }
    return true;
}

std::uint32_t PanelBuilder::intern(std::unordered_map<std::string, std::uint32_t>& map, std::vector<std::string>& codes,
                                   std::string_view code)
{
    auto [it, inserted] = map.try_emplace(std::string(code), static_cast<std::uint32_t>(codes.size()));
    if (inserted) codes.emplace_back(code);
    return it->second;
}

void PanelBuilder::add(int year, std::string_view region, std::string_view industry, double employment, double imputed,
                       bool imputed_flag)
{
    cells_.push_back({year, intern(region_ids_, region_codes_, region), intern(industry_ids_, industry_codes_, industry),
                      employment, imputed, imputed_flag});
}

EmploymentPanel PanelBuilder::build() &&
{
    EmploymentPanel panel;
    panel.regions_ = Catalog::sorted(region_codes_);
    panel.industries_ = Catalog::sorted(industry_codes_);

    std::vector<std::uint32_t> region_remap(region_codes_.size());
    for (std::size_t i = 0; i < region_codes_.size(); ++i) {
        region_remap[i] = static_cast<std::uint32_t>(*panel.regions_.find(region_codes_[i]));
    }
    std::vector<std::uint32_t> industry_remap(industry_codes_.size());
    for (std::size_t i = 0; i < industry_codes_.size(); ++i) {
        industry_remap[i] = static_cast<std::uint32_t>(*panel.industries_.find(industry_codes_[i]));
    }
    for (auto& c : cells_) {
        c.region = region_remap[c.region];
        c.industry = industry_remap[c.industry];
    }
    // Stable so that repeated keys are summed in insertion order.
    std::stable_sort(cells_.begin(), cells_.end(), [](const Cell& a, const Cell& b) {
        return std::tie(a.year, a.region, a.industry) < std::tie(b.year, b.region, b.industry);
    });
    auto& out = panel.records_;
    out.reserve(cells_.size());
    for (const auto& c : cells_) {
        if (!out.empty() && out.back().year == c.year && out.back().region == c.region && out.back().industry == c.industry) {
            out.back().employment += c.employment;
            out.back().imputed += c.imputed;
            out.back().imputed_flag = out.back().imputed_flag || c.imputed_flag;
        } else {
            out.push_back({c.year, c.region, c.industry, c.employment, c.imputed, c.imputed_flag});
        }
    }
    return panel;
}

EmploymentPanel impute_suppressed(const std::vector<RawEmploymentRecord>& records, const SizeClassTable& table)
{
    PanelBuilder builder;
    std::set<std::tuple<int, std::string_view, std::string_view>> seen;
    for (const auto& rec : records) {
        if (rec.employment.has_value() == rec.suppression_flag.has_value()) {
            throw std::invalid_argument("record must carry exactly one of employment count and suppression flag");
        }
        if (!seen.emplace(rec.year, rec.region_code, rec.industry_code).second) {
            throw std::invalid_argument("duplicate record for year " + std::to_string(rec.year) + ", region " +
                                        rec.region_code + ", industry " + rec.industry_code);
        }
        if (rec.employment) {
            builder.add(rec.year, rec.region_code, rec.industry_code, static_cast<double>(*rec.employment), 0.0, false);
            continue;
        }
        const auto* cls = table.find(*rec.suppression_flag);
        if (!cls) throw ConfigError("unknown suppression flag '" + *rec.suppression_flag + "'");
        builder.add(rec.year, rec.region_code, rec.industry_code, cls->imputed, cls->imputed, true);
    }
    return std::move(builder).build();
}

// ---------------------------------------------------------------------------
// crosswalks

Crosswalk Crosswalk::load(const std::filesystem::path& path, CrosswalkKind kind, char delim)
{
    auto table = read_delimited(path, delim, true);
    if (table.header.size() < 2) throw SchemaError(path.string() + ": crosswalk needs two columns (source, target)");
    Crosswalk cw(kind);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() < 2) {
            throw SchemaError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": expected two fields");
        }
        auto source = trim(row[0]);
        auto target = trim(row[1]);
        if (source.empty() || target.empty()) {
            throw SchemaError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": empty code");
        }
        cw.add(source, target);
    }
    return cw;
}

Crosswalk Crosswalk::identity(CrosswalkKind kind, const Catalog& codes)
{
    Crosswalk cw(kind);
    for (const auto& c : codes.codes()) cw.add(c, c);
    return cw;
}

void Crosswalk::add(const std::string& source, const std::string& target)
{
    auto [it, inserted] = mapping_.emplace(source, target);
    if (!inserted && it->second != target) {
        throw ConfigError("crosswalk maps '" + source + "' to both '" + it->second + "' and '" + target + "'");
    }
}

std::optional<std::string> Crosswalk::lookup(std::string_view source) const
{
    auto it = mapping_.find(source);
    if (it == mapping_.end()) return std::nullopt;
    return it->second;
}

AttributeTable AttributeTable::load(const std::filesystem::path& path, char delim)
{
    auto table = read_delimited(path, delim, true);
    if (table.header.size() < 3) throw SchemaError(path.string() + ": attribute table needs columns code,attribute,value");
    AttributeTable out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() < 3) {
            throw SchemaError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": expected three fields");
        }
        out.set(trim(row[0]), trim(row[1]), trim(row[2]));
    }
    return out;
}

void AttributeTable::set(const std::string& code, const std::string& attribute, const std::string& value)
{
    auto& attrs = values_[code];
    auto [it, inserted] = attrs.emplace(attribute, value);
    if (!inserted && it->second != value) {
        throw ConfigError("attribute '" + attribute + "' of '" + code + "' given as both '" + it->second + "' and '" +
                          value + "'");
    }
}

std::optional<std::string> AttributeTable::value(std::string_view code, std::string_view attribute) const
{
    auto it = values_.find(code);
    if (it == values_.end()) return std::nullopt;
    auto jt = it->second.find(attribute);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

// ---------------------------------------------------------------------------
// aggregation

EmploymentPanel aggregate_geography(const EmploymentPanel& panel, const Crosswalk& crosswalk)
{
    if (crosswalk.kind() != CrosswalkKind::geographic) throw ConfigError("aggregate_geography needs a geographic crosswalk");
    std::vector<std::string> target(panel.regions().size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const auto& code = panel.regions().code(i);
        target[i] = crosswalk.lookup(code).value_or(code);
    }
    PanelBuilder builder;
    for (const auto& r : panel.records()) {
        builder.add(r.year, target[r.region], panel.industries().code(r.industry), r.employment, r.imputed, r.imputed_flag);
    }
    return std::move(builder).build();
}

namespace {

EmploymentPanel remap_industries(const EmploymentPanel& panel, const std::vector<std::optional<std::string>>& target,
                                 AggregationReport* report)
{
    PanelBuilder builder;
    for (const auto& r : panel.records()) {
        const auto& t = target[r.industry];
        if (!t) {
            if (report) report->dropped_employment += r.employment;
            continue;
        }
        builder.add(r.year, panel.regions().code(r.region), *t, r.employment, r.imputed, r.imputed_flag);
    }
    return std::move(builder).build();
}

}  // namespace

EmploymentPanel aggregate_industry(const EmploymentPanel& panel, int digits, AggregationReport* report)
{
    if (digits < 2 || digits > 6) throw ConfigError("industry digit level must be between 2 and 6");
    std::vector<std::optional<std::string>> target(panel.industries().size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const auto& code = panel.industries().code(i);
        if (code.size() < static_cast<std::size_t>(digits)) {
            if (report) {
                report->issues.push_back({code, "code shorter than " + std::to_string(digits) + " digits"});
            }
            continue;
        }
        target[i] = code.substr(0, static_cast<std::size_t>(digits));
    }
    return remap_industries(panel, target, report);
}

EmploymentPanel aggregate_industry(const EmploymentPanel& panel, const Crosswalk& clusters, AggregationReport* report)
{
    if (clusters.kind() != CrosswalkKind::industry) throw ConfigError("aggregate_industry needs an industry crosswalk");
    std::vector<std::optional<std::string>> target(panel.industries().size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const auto& code = panel.industries().code(i);
        target[i] = clusters.lookup(code);
        if (!target[i] && report) report->issues.push_back({code, "not in industry crosswalk"});
    }
    return remap_industries(panel, target, report);
}

EmploymentPanel exclude_industries(const EmploymentPanel& panel, const std::vector<std::string>& prefixes)
{
    std::vector<std::optional<std::string>> target(panel.industries().size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const auto& code = panel.industries().code(i);
        const bool excluded = std::any_of(prefixes.begin(), prefixes.end(),
                                          [&](const std::string& p) { return code.starts_with(p); });
        if (!excluded) target[i] = code;
    }
    return remap_industries(panel, target, nullptr);
}

EmploymentMatrix build_matrix(const EmploymentPanel& panel, int year)
{
    const auto& recs = panel.records();
    auto first = std::lower_bound(recs.begin(), recs.end(), year, [](const PanelRecord& r, int y) { return r.year < y; });
    auto last = std::upper_bound(first, recs.end(), year, [](int y, const PanelRecord& r) { return y < r.year; });
    if (first == last) {
        std::ostringstream msg;
        msg << "year " << year << " not in panel; available years:";
        for (int y : panel.years()) msg << ' ' << y;
        throw ConfigError(msg.str());
    }

    std::vector<char> has_region(panel.regions().size(), 0);
    std::vector<char> has_industry(panel.industries().size(), 0);
    for (auto it = first; it != last; ++it) {
        has_region[it->region] = 1;
        has_industry[it->industry] = 1;
    }
    auto compact = [](const std::vector<char>& present, std::vector<std::size_t>& ids) {
        std::vector<std::ptrdiff_t> pos(present.size(), -1);
        for (std::size_t i = 0; i < present.size(); ++i) {
            if (present[i]) {
                pos[i] = static_cast<std::ptrdiff_t>(ids.size());
                ids.push_back(i);
            }
        }
        return pos;
    };
    std::vector<std::size_t> region_ids;
    std::vector<std::size_t> industry_ids;
    const auto rpos = compact(has_region, region_ids);
    const auto ipos = compact(has_industry, industry_ids);

    EmploymentMatrix out;
    out.year = year;
    out.regions = panel.regions().subset(region_ids);
    out.industries = panel.industries().subset(industry_ids);
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(region_ids.size()),
                                       static_cast<Eigen::Index>(industry_ids.size()));
    for (auto it = first; it != last; ++it) out.values(rpos[it->region], ipos[it->industry]) = it->employment;
    return out;
}

// ---------------------------------------------------------------------------
// serialization

std::string serialize_panel(const EmploymentPanel& panel, char delim)
{
    std::string out;
    out.reserve(panel.records().size() * 32 + 64);
    for (const char* h : {"year", "region", "industry", "employment"}) {
        out += h;
        out += delim;
    }
    out += "imputed\n";
    for (const auto& r : panel.records()) {
        out += std::to_string(r.year);
        out += delim;
        out += quote_field(panel.regions().code(r.region), delim);
        out += delim;
        out += quote_field(panel.industries().code(r.industry), delim);
        out += delim;
        out += format_double(r.employment);
        out += delim;
        out += r.is_imputed() ? '1' : '0';
        out += '\n';
    }
    return out;
}

EmploymentPanel parse_panel(std::string_view text, char delim)
{
    auto table = parse_delimited(text, delim, true);
    if (table.header.empty()) return {};
    const std::vector<std::string> expected = {"year", "region", "industry", "employment", "imputed"};
    if (table.header != expected) throw SchemaError("panel file must have columns year,region,industry,employment,imputed");
    PanelBuilder builder;
    std::set<std::tuple<int, std::string, std::string>> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto where = "panel line " + std::to_string(table.line_numbers[r]);
        if (row.size() != 5) throw SchemaError(where + ": expected 5 fields");
        auto year = parse_int(row[0]);
        auto emp = parse_double(row[3]);
        auto imp = parse_int(row[4]);
        if (!year || !emp || !imp || *emp < 0 || (*imp != 0 && *imp != 1)) throw SchemaError(where + ": malformed record");
        if (!seen.emplace(static_cast<int>(*year), row[1], row[2]).second) throw SchemaError(where + ": duplicate key");
        builder.add(static_cast<int>(*year), row[1], row[2], *emp, *imp ? *emp : 0.0, *imp == 1);
    }
    return std::move(builder).build();
}

void write_panel(const EmploymentPanel& panel, const std::filesystem::path& path, char delim)
{
    write_file(path, serialize_panel(panel, delim));
}

EmploymentPanel read_panel(const std::filesystem::path& path, char delim)
{
    return parse_panel(read_file(path), delim);
}

}  // namespace ecx
