#pragma once

#include <compare>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace migh {

using Decade = int;

/// Stable canonical identifier of a place (state or union territory).
struct EntityId {
  std::string value;

  EntityId() = default;
  explicit EntityId(std::string v) : value(std::move(v)) {}

  bool empty() const noexcept { return value.empty(); }
  auto operator<=>(const EntityId&) const = default;
};

struct Entity {
  EntityId id;
  std::string canonical_name;
  std::set<std::string> aliases;  // as written in the registry file
  std::set<Decade> valid_decades;
  std::optional<EntityId> parent;  // predecessor entity for places created by a split

  bool valid_in(Decade d) const { return valid_decades.contains(d); }
};

/// Bijection between a decade's numeric labels and canonical identifiers.
class IndexMap {
 public:
  IndexMap() = default;
  explicit IndexMap(Decade decade) : decade_(decade) {}

  Decade decade() const noexcept { return decade_; }
  /// Throws RegistryError if either side is already bound.
  void bind(int index, const EntityId& id);

  std::optional<EntityId> entity(int index) const;
  std::optional<int> index(const EntityId& id) const;
  bool contains(const EntityId& id) const { return by_entity_.contains(id); }
  std::size_t size() const noexcept { return by_index_.size(); }
  const std::map<int, EntityId>& pairs() const noexcept { return by_index_; }

 private:
  Decade decade_ = 0;
  std::map<int, EntityId> by_index_;
  std::map<EntityId, int> by_entity_;
};

/// Case-folds, trims, collapses internal whitespace and rewrites "&" as "and".
std::string normalize_alias(std::string_view raw);

/// Immutable catalogue of entities, their aliases and per-decade index maps.
class EntityRegistry {
 public:
  EntityRegistry() = default;
  /// Validates alias disjointness, non-empty validity sets and index-map consistency.
  EntityRegistry(std::vector<Entity> entities, std::vector<IndexMap> index_maps = {});

  EntityId canonicalize_name(std::string_view raw) const;
  std::optional<EntityId> try_canonicalize(std::string_view raw) const;
  EntityId resolve_index(int index, Decade decade) const;

  const Entity& entity(const EntityId& id) const;
  const Entity* find(const EntityId& id) const;
  const std::string& name_of(const EntityId& id) const { return entity(id).canonical_name; }

  const IndexMap& index_map(Decade decade) const;
  bool has_index_map(Decade decade) const { return maps_.contains(decade); }

  /// Entities in canonical id order.
  const std::vector<Entity>& entities() const noexcept { return entities_; }
  std::vector<EntityId> valid_entities(Decade decade) const;
  /// Entities whose parent is `id`.
  std::vector<EntityId> children_of(const EntityId& id) const;

 private:
  std::vector<Entity> entities_;
  std::map<EntityId, std::size_t> by_id_;
  std::unordered_map<std::string, EntityId, std::hash<std::string>> by_alias_;
  std::map<Decade, IndexMap> maps_;
};

/// Registry file: canonical_id, canonical_name, alias, valid_decades[, parent_id]
/// with one row per alias and decades separated by ';'.
std::vector<Entity> read_registry_entities(std::istream& in);
/// Index-map file: decade, index, canonical_id.
std::vector<IndexMap> read_index_maps(std::istream& in);

/// Writers for the two file formats above (aliases and decades in sorted order).
void write_registry(std::ostream& out, const EntityRegistry& registry);
void write_index_maps(std::ostream& out, const EntityRegistry& registry);

EntityRegistry load_registry(const std::filesystem::path& registry_file,
                             const std::optional<std::filesystem::path>& index_file = std::nullopt);

}  // namespace migh

template <>
struct std::hash<migh::EntityId> {
  std::size_t operator()(const migh::EntityId& id) const noexcept {
    return std::hash<std::string>{}(id.value);
  }
};
