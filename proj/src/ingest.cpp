#include "migh/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "migh/csv.hpp"
#include "migh/error.hpp"

namespace migh {

namespace {

struct LineContext {
  const EntityRegistry& registry;
  const ParseOptions& options;
  std::size_t line;
};

EntityId resolve_place(std::string_view field, Decade decade, const LineContext& ctx) {
  if (ctx.options.resolve_numeric_labels && ctx.registry.has_index_map(decade)) {
    if (auto idx = csv::parse_int(field)) return ctx.registry.resolve_index(static_cast<int>(*idx), decade);
  }
  return ctx.registry.canonicalize_name(field);
}

Decade check_decade(std::string_view field, const LineContext& ctx) {
  auto d = csv::parse_int(field);
  if (!d) throw ParseError(ctx.line, "bad decade '" + std::string(field) + "'");
  if (ctx.options.decade && *ctx.options.decade != *d)
    throw ParseError(ctx.line, "decade " + std::to_string(*d) + " does not match expected " +
                                   std::to_string(*ctx.options.decade));
  return static_cast<Decade>(*d);
}

OriginRef parse_origin(std::string_view kind_field, std::string_view name_field, Decade decade,
                       const LineContext& ctx) {
  auto kind = parse_origin_kind(kind_field);
  if (!kind) throw ParseError(ctx.line, "bad origin_kind '" + std::string(kind_field) + "'");
  if (*kind == OriginKind::Interstate) {
    if (name_field.empty()) throw ParseError(ctx.line, "interstate origin without name");
    return OriginRef::interstate(resolve_place(name_field, decade, ctx));
  }
  if (!name_field.empty())
    throw ParseError(ctx.line, "origin_name must be empty for " + std::string(kind_field));
  return OriginRef::pseudo(*kind);
}

double parse_count(std::string_view field, std::size_t line) {
  auto v = csv::parse_double(field);
  if (!v) throw ParseError(line, "bad count '" + std::string(field) + "'");
  if (*v < 0) throw NegativeCount(line);
  return *v;
}

void store(MigrationTable& table, const EntityId& dest, const OriginRef& origin, DurationBin bin,
           double value, std::size_t line) {
  if (origin.is_interstate() && origin.entity == dest)
    throw ParseError(line, "interstate origin equals destination");
  Row& r = table.row(dest, origin);
  if (bin == DurationBin::Total) {
    if (r.total) throw ParseError(line, "duplicate total record");
    r.total = value;
  } else {
    if (r.has(bin)) throw ParseError(line, "duplicate record");
    r.set(bin, value);
  }
}

constexpr std::array<std::string_view, 6> kLongHeader = {"decade",   "destination", "origin_kind",
                                                         "origin_name", "duration_bin", "count"};

}  // namespace

MigrationTable parse_table(std::istream& in, const EntityRegistry& registry, const ParseOptions& options) {
  csv::Reader reader(in);
  std::vector<std::string> f;
  MigrationTable table(options.decade.value_or(0));
  bool first = true;
  bool decade_seen = options.decade.has_value();
  while (reader.next(f)) {
    const LineContext ctx{registry, options, reader.line()};
    if (first) {
      first = false;
      if (!f.empty() && f[0] == "decade") {
        if (f.size() != kLongHeader.size() || !std::equal(f.begin(), f.end(), kLongHeader.begin()))
          throw ParseError(ctx.line, "unexpected header");
        continue;
      }
    }
    if (f.size() != 6) throw ParseError(ctx.line, "expected 6 fields, got " + std::to_string(f.size()));
    const Decade d = check_decade(f[0], ctx);
    if (!decade_seen) {
      table.set_decade(d);
      decade_seen = true;
    } else if (d != table.decade()) {
      throw ParseError(ctx.line, "mixed decades in one table");
    }
    const EntityId dest = resolve_place(f[1], d, ctx);
    const OriginRef origin = parse_origin(f[2], f[3], d, ctx);
    auto bin = parse_bin(f[4]);
    if (!bin) throw ParseError(ctx.line, "bad duration_bin '" + f[4] + "'");
    store(table, dest, origin, *bin, parse_count(f[5], ctx.line), ctx.line);
  }
  validate_structure(table);
  return table;
}

MigrationTable parse_wide_table(std::istream& in, const EntityRegistry& registry,
                                const ParseOptions& options) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw ParseError(0, "empty input");
  if (header.size() < 5 || header[0] != "decade" || header[1] != "destination" ||
      header[2] != "origin_kind" || header[3] != "origin_name")
    throw ParseError(reader.line(), "unexpected wide header");
  std::vector<DurationBin> columns;
  for (std::size_t c = 4; c < header.size(); ++c) {
    auto bin = parse_bin(header[c]);
    if (!bin) throw ParseError(reader.line(), "unknown bin column '" + header[c] + "'");
    if (std::find(columns.begin(), columns.end(), *bin) != columns.end())
      throw ParseError(reader.line(), "duplicate bin column '" + header[c] + "'");
    columns.push_back(*bin);
  }

  MigrationTable table(options.decade.value_or(0));
  bool decade_seen = options.decade.has_value();
  std::vector<std::string> f;
  while (reader.next(f)) {
    const LineContext ctx{registry, options, reader.line()};
    if (f.size() != header.size())
      throw ParseError(ctx.line, "expected " + std::to_string(header.size()) + " fields");
    const Decade d = check_decade(f[0], ctx);
    if (!decade_seen) {
      table.set_decade(d);
      decade_seen = true;
    } else if (d != table.decade()) {
      throw ParseError(ctx.line, "mixed decades in one table");
    }
    const EntityId dest = resolve_place(f[1], d, ctx);
    const OriginRef origin = parse_origin(f[2], f[3], d, ctx);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& cell = f[c + 4];
      if (cell.empty()) continue;
      store(table, dest, origin, columns[c], parse_count(cell, ctx.line), ctx.line);
    }
  }
  validate_structure(table);
  return table;
}

MigrationTable read_table(const std::filesystem::path& file, const EntityRegistry& registry,
                          const ParseOptions& options) {
  std::ifstream in(file);
  if (!in) throw ParseError(0, "cannot open " + file.string());
  return parse_table(in, registry, options);
}

MigrationTable read_any_table(const std::filesystem::path& file, const EntityRegistry& registry,
                              const ParseOptions& options) {
  std::ifstream in(file);
  if (!in) throw ParseError(0, "cannot open " + file.string());
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  const bool wide = first.find("duration_bin") == std::string::npos && first.find("lt1") != std::string::npos;
  return wide ? parse_wide_table(in, registry, options) : parse_table(in, registry, options);
}

void write_table(std::ostream& out, const MigrationTable& table, const EntityRegistry& registry,
                 const WriteOptions& options) {
  out << "decade,destination,origin_kind,origin_name,duration_bin,count\n";
  const std::string decade = std::to_string(table.decade());
  for (const auto& [key, row] : table.rows()) {
    const std::string prefix = decade + "," + csv::escape(registry.name_of(key.destination)) + "," +
                               std::string(to_string(key.origin.kind)) + "," +
                               (key.origin.is_interstate() ? csv::escape(registry.name_of(key.origin.entity)) : "") +
                               ",";
    for (std::size_t b = 0; b < kStoredBins; ++b) {
      if (!row.has(bin_at(b))) continue;
      out << prefix << to_string(bin_at(b)) << "," << csv::format_double(row.bins[b]) << "\n";
    }
    if (options.include_totals && row.total)
      out << prefix << "total," << csv::format_double(*row.total) << "\n";
  }
}

void write_table(const std::filesystem::path& file, const MigrationTable& table,
                 const EntityRegistry& registry, const WriteOptions& options) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw PreconditionError("cannot write " + file.string());
  write_table(out, table, registry, options);
}

void validate_structure(const MigrationTable& table) {
  for (const auto& dest : table.destinations()) {
    if (!(table.destination_total(dest) > 0))
      throw ParseError(0, "destination " + dest.value + " has no positive inflow");
  }
  for (const auto& [key, _] : table.rows()) {
    if (key.origin.is_interstate() && key.origin.entity == key.destination)
      throw ParseError(0, "interstate diagonal at " + key.destination.value);
  }
}

MigrationTable synthesize_totals(const MigrationTable& table, double tolerance) {
  MigrationTable out = table;
  for (auto& [key, row] : out.mutable_rows()) {
    const double computed = row.sum();
    if (row.total) {
      if (std::abs(*row.total - computed) > tolerance) {
        std::string origin(to_string(key.origin.kind));
        if (key.origin.is_interstate()) origin = key.origin.entity.value;
        throw TotalMismatch(key.destination.value, origin, *row.total, computed);
      }
    } else {
      row.total = computed;
    }
  }
  return out;
}

CategoryShares category_shares(const MigrationTable& table) {
  if (!table.has_totals()) throw PreconditionError("category_shares requires totals");
  std::array<double, 5> by_kind{};
  for (const auto& [key, row] : table.rows()) by_kind[static_cast<std::size_t>(key.origin.kind)] += *row.total;
  const double all = std::accumulate(by_kind.begin(), by_kind.end(), 0.0);
  if (!(all > 0)) throw PreconditionError("table has no migrants");
  CategoryShares s;
  s.interstate = by_kind[0] / all;
  s.intrastate = (by_kind[1] + by_kind[2]) / all;
  s.international = by_kind[3] / all;
  s.unclassifiable = by_kind[4] / all;
  return s;
}

DurationShares duration_shares(const MigrationTable& table) {
  if (!table.has_totals()) throw PreconditionError("duration_shares requires totals");
  std::array<double, kStoredBins> by_bin{};
  for (const auto& [_, row] : table.rows())
    for (std::size_t b = 0; b < kStoredBins; ++b) by_bin[b] += row.bins[b];
  const double all = std::accumulate(by_bin.begin(), by_bin.end(), 0.0);
  if (!(all > 0)) throw PreconditionError("table has no migrants");
  DurationShares s;
  s.less_than_1 = by_bin[0] / all;
  s.one_to_twenty = (by_bin[1] + by_bin[2] + by_bin[3]) / all;
  s.over_twenty = by_bin[4] / all;
  s.not_stated = by_bin[5] / all;
  return s;
}

MigrationTable round_largest_remainder(const MigrationTable& table) {
  MigrationTable out = table;
  struct Cell {
    double* value;
    double fraction;
    std::size_t order;
  };
  auto& rows = out.mutable_rows();
  auto it = rows.begin();
  while (it != rows.end()) {
    const EntityId dest = it->first.destination;
    std::vector<Cell> cells;
    double sum = 0;
    for (; it != rows.end() && it->first.destination == dest; ++it) {
      Row& r = it->second;
      for (std::size_t b = 0; b < kStoredBins; ++b) {
        if (!r.has(bin_at(b))) continue;
        sum += r.bins[b];
        const double fl = std::floor(r.bins[b]);
        cells.push_back({&r.bins[b], r.bins[b] - fl, cells.size()});
        r.bins[b] = fl;
      }
    }
    const double target = std::round(sum);
    double floored = 0;
    for (const auto& c : cells) floored += *c.value;
    auto deficit = static_cast<long long>(std::llround(target - floored));
    std::stable_sort(cells.begin(), cells.end(),
                     [](const Cell& a, const Cell& b) { return a.fraction > b.fraction; });
    for (std::size_t k = 0; k < cells.size() && deficit > 0; ++k, --deficit) *cells[k].value += 1.0;
  }
  for (auto& [_, r] : rows) r.refresh_total();
  return out;
}

}  // namespace migh
