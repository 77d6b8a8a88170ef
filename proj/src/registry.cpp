#include "migh/registry.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "migh/csv.hpp"
#include "migh/error.hpp"

namespace migh {

void IndexMap::bind(int index, const EntityId& id) {
  if (by_index_.contains(index))
    throw RegistryError("index " + std::to_string(index) + " bound twice in decade " +
                        std::to_string(decade_));
  if (by_entity_.contains(id))
    throw RegistryError("entity " + id.value + " bound twice in decade " + std::to_string(decade_));
  by_index_.emplace(index, id);
  by_entity_.emplace(id, index);
}

std::optional<EntityId> IndexMap::entity(int index) const {
  if (auto it = by_index_.find(index); it != by_index_.end()) return it->second;
  return std::nullopt;
}

std::optional<int> IndexMap::index(const EntityId& id) const {
  if (auto it = by_entity_.find(id); it != by_entity_.end()) return it->second;
  return std::nullopt;
}

std::string normalize_alias(std::string_view raw) {
  std::string spaced;
  spaced.reserve(raw.size() + 8);
  for (char c : raw) {
    if (c == '&') {
      spaced += " and ";
    } else {
      spaced.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  std::string out;
  bool pending_space = false;
  for (char c : spaced) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

EntityRegistry::EntityRegistry(std::vector<Entity> entities, std::vector<IndexMap> index_maps) {
  std::sort(entities.begin(), entities.end(),
            [](const Entity& a, const Entity& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < entities.size(); ++k) {
    auto& e = entities[k];
    if (e.id.empty()) throw RegistryError("entity with empty canonical id");
    if (e.valid_decades.empty()) throw RegistryError("entity " + e.id.value + " has no valid decade");
    if (!by_id_.emplace(e.id, k).second) throw RegistryError("duplicate entity id " + e.id.value);
    e.aliases.insert(e.canonical_name);
    for (const auto& alias : e.aliases) {
      auto key = normalize_alias(alias);
      auto [it, inserted] = by_alias_.emplace(key, e.id);
      if (!inserted && it->second != e.id)
        throw RegistryError("alias '" + alias + "' shared by " + it->second.value + " and " +
                            e.id.value);
    }
  }
  entities_ = std::move(entities);
  for (const auto& e : entities_) {
    if (e.parent && !by_id_.contains(*e.parent))
      throw RegistryError("entity " + e.id.value + " has unknown parent " + e.parent->value);
  }
  for (auto& m : index_maps) {
    for (const auto& [idx, id] : m.pairs()) {
      const Entity* e = find(id);
      if (!e) throw RegistryError("index map " + std::to_string(m.decade()) + " names unknown entity " + id.value);
      if (!e->valid_in(m.decade()))
        throw RegistryError("entity " + id.value + " is not valid in decade " +
                            std::to_string(m.decade()));
    }
    const Decade d = m.decade();
    if (!maps_.emplace(d, std::move(m)).second)
      throw RegistryError("duplicate index map for decade " + std::to_string(d));
  }
}

std::optional<EntityId> EntityRegistry::try_canonicalize(std::string_view raw) const {
  if (auto it = by_alias_.find(normalize_alias(raw)); it != by_alias_.end()) return it->second;
  return std::nullopt;
}

EntityId EntityRegistry::canonicalize_name(std::string_view raw) const {
  if (auto id = try_canonicalize(raw)) return *id;
  throw UnknownName(std::string(raw));
}

EntityId EntityRegistry::resolve_index(int index, Decade decade) const {
  auto it = maps_.find(decade);
  if (it == maps_.end()) throw UnknownIndex(index, decade);
  if (auto id = it->second.entity(index)) return *id;
  throw UnknownIndex(index, decade);
}

const Entity* EntityRegistry::find(const EntityId& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &entities_[it->second];
}

const Entity& EntityRegistry::entity(const EntityId& id) const {
  if (const Entity* e = find(id)) return *e;
  throw RegistryError("unknown entity id " + id.value);
}

const IndexMap& EntityRegistry::index_map(Decade decade) const {
  auto it = maps_.find(decade);
  if (it == maps_.end()) throw RegistryError("no index map for decade " + std::to_string(decade));
  return it->second;
}

std::vector<EntityId> EntityRegistry::valid_entities(Decade decade) const {
  std::vector<EntityId> out;
  for (const auto& e : entities_)
    if (e.valid_in(decade)) out.push_back(e.id);
  return out;
}

std::vector<EntityId> EntityRegistry::children_of(const EntityId& id) const {
  std::vector<EntityId> out;
  for (const auto& e : entities_)
    if (e.parent && *e.parent == id) out.push_back(e.id);
  return out;
}

namespace {

bool is_comment(const std::vector<std::string>& fields) {
  return !fields.empty() && fields.front().starts_with('#');
}

}  // namespace

std::vector<Entity> read_registry_entities(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> f;
  std::map<EntityId, Entity> by_id;
  while (reader.next(f)) {
    if (is_comment(f)) continue;
    if (f.size() >= 1 && f[0] == "canonical_id") continue;
    if (f.size() < 4 || f.size() > 5)
      throw RegistryError("registry line " + std::to_string(reader.line()) +
                          ": expected 4 or 5 fields");
    EntityId id(f[0]);
    if (id.empty() || f[1].empty() || f[2].empty())
      throw RegistryError("registry line " + std::to_string(reader.line()) + ": empty field");
    std::set<Decade> decades;
    std::stringstream ds(f[3]);
    std::string tok;
    while (std::getline(ds, tok, ';')) {
      if (csv::trim(tok).empty()) continue;
      auto d = csv::parse_int(tok);
      if (!d) throw RegistryError("registry line " + std::to_string(reader.line()) + ": bad decade '" + tok + "'");
      decades.insert(static_cast<Decade>(*d));
    }
    std::optional<EntityId> parent;
    if (f.size() == 5 && !f[4].empty()) parent = EntityId(f[4]);

    auto [it, inserted] = by_id.try_emplace(id);
    Entity& e = it->second;
    if (inserted) {
      e.id = id;
      e.canonical_name = f[1];
      e.valid_decades = decades;
      e.parent = parent;
    } else if (e.canonical_name != f[1] || e.valid_decades != decades ||
               (parent && e.parent != parent)) {
      throw RegistryError("registry line " + std::to_string(reader.line()) +
                          ": conflicting attributes for " + id.value);
    } else if (parent) {
      e.parent = parent;
    }
    e.aliases.insert(f[2]);
  }
  std::vector<Entity> out;
  out.reserve(by_id.size());
  for (auto& [_, e] : by_id) out.push_back(std::move(e));
  return out;
}

std::vector<IndexMap> read_index_maps(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> f;
  std::map<Decade, IndexMap> maps;
  while (reader.next(f)) {
    if (is_comment(f)) continue;
    if (!f.empty() && f[0] == "decade") continue;
    if (f.size() != 3)
      throw RegistryError("index-map line " + std::to_string(reader.line()) + ": expected 3 fields");
    auto d = csv::parse_int(f[0]);
    auto idx = csv::parse_int(f[1]);
    if (!d || !idx)
      throw RegistryError("index-map line " + std::to_string(reader.line()) + ": bad number");
    auto [it, _] = maps.try_emplace(static_cast<Decade>(*d), static_cast<Decade>(*d));
    it->second.bind(static_cast<int>(*idx), EntityId(f[2]));
  }
  std::vector<IndexMap> out;
  for (auto& [_, m] : maps) out.push_back(std::move(m));
  return out;
}

EntityRegistry load_registry(const std::filesystem::path& registry_file,
                             const std::optional<std::filesystem::path>& index_file) {
  std::ifstream reg(registry_file);
  if (!reg) throw RegistryError("cannot open registry file " + registry_file.string());
  auto entities = read_registry_entities(reg);
  std::vector<IndexMap> maps;
  if (index_file) {
    std::ifstream idx(*index_file);
    if (!idx) throw RegistryError("cannot open index-map file " + index_file->string());
    maps = read_index_maps(idx);
  }
  return EntityRegistry(std::move(entities), std::move(maps));
}

void write_registry(std::ostream& out, const EntityRegistry& registry) {
  out << "canonical_id,canonical_name,alias,valid_decades,parent_id\n";
  for (const Entity& e : registry.entities()) {
    std::string decades;
    for (Decade d : e.valid_decades) decades += (decades.empty() ? "" : ";") + std::to_string(d);
    for (const auto& alias : e.aliases)
      out << csv::escape(e.id.value) << ',' << csv::escape(e.canonical_name) << ',' << csv::escape(alias)
          << ',' << decades << ',' << (e.parent ? csv::escape(e.parent->value) : "") << '\n';
  }
}

void write_index_maps(std::ostream& out, const EntityRegistry& registry) {
  out << "decade,index,canonical_id\n";
  std::set<Decade> decades;
  for (const Entity& e : registry.entities()) decades.insert(e.valid_decades.begin(), e.valid_decades.end());
  for (Decade d : decades) {
    if (!registry.has_index_map(d)) continue;
    for (const auto& [idx, id] : registry.index_map(d).pairs())
      out << d << ',' << idx << ',' << csv::escape(id.value) << '\n';
  }
}

}  // namespace migh
