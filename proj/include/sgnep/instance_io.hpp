#pragma once

// JSON (de)serialization of game instances together with their dual graph. Graph nodes
// and Cournot market indices are 1-based in the file and 0-based in memory. Infinite box
// bounds are written as null.

#include "sgnep/games.hpp"
#include "sgnep/operators.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <variant>

namespace sgnep {

using Json = nlohmann::ordered_json;

class InstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline Json vector_to_json(const Vector &v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) {
      out.push_back(v(i));
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

/// null entries decode to fill (used for infinite bounds).
inline Vector vector_from_json(const Json &j, double fill = std::numeric_limits<double>::quiet_NaN()) {
  if (!j.is_array()) throw InstanceError("expected a numeric array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_null()) {
      if (std::isnan(fill)) throw InstanceError("unexpected null entry");
      v(static_cast<Index>(i)) = fill;
    } else if (j[i].is_number()) {
      v(static_cast<Index>(i)) = j[i].get<double>();
    } else {
      throw InstanceError("expected a number");
    }
  }
  return v;
}

inline Json matrix_to_json(const Matrix &m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

/// Row-major nested arrays; cols is needed when there are no rows.
inline Matrix matrix_from_json(const Json &j, Index cols = -1) {
  if (!j.is_array()) throw InstanceError("expected an array of rows");
  if (j.empty()) return Matrix(0, std::max<Index>(cols, 0));
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r]);
    require_size(row.size(), m.cols(), "matrix row");
    m.row(static_cast<Index>(r)) = row.transpose();
  }
  if (cols >= 0) require_size(m.cols(), cols, "matrix columns");
  return m;
}

template <class T>
T field(const Json &j, const char *key) {
  if (!j.contains(key)) throw InstanceError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw InstanceError(std::string("field '") + key + "': " + e.what());
  }
}

inline const Json &section(const Json &j, const char *key) {
  if (!j.contains(key) || !j.at(key).is_object()) {
    throw InstanceError(std::string("missing section '") + key + "'");
  }
  return j.at(key);
}

}  // namespace io

enum class InstanceKind { bilinear, cournot, affine };

inline std::string_view to_string(InstanceKind k) {
  switch (k) {
    case InstanceKind::bilinear: return "bilinear";
    case InstanceKind::cournot: return "cournot";
    case InstanceKind::affine: return "affine";
  }
  return "?";
}

/// Everything needed to rebuild a game and its graph.
struct Instance {
  std::variant<BilinearParams, CournotData, AffineGameData> data;
  Index nodes = 0;
  std::vector<Edge> edges;  // 0-based

  InstanceKind kind() const { return static_cast<InstanceKind>(data.index()); }

  GameSpec game() const {
    return std::visit(
        [](const auto &d) -> GameSpec {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, BilinearParams>) {
            return build_bilinear_game(d);
          } else if constexpr (std::is_same_v<T, CournotData>) {
            return build_cournot_game(d);
          } else {
            return build_affine_game(d);
          }
        },
        data);
  }

  DualGraph graph() const { return DualGraph::from_edges(nodes, edges); }
  ExtendedProblem problem() const { return {game(), graph()}; }
};

inline Instance make_instance(BilinearParams p) {
  const std::vector<Edge> edges{{0, 1, 1.0}};
  return {p, 2, edges};
}

/// The Cournot market on the cycle with chords (2, 15) and (6, 13) when there are at
/// least 15 companies, otherwise on the plain cycle (a path for two companies).
inline Instance make_instance(CournotData d) {
  const Index n = d.companies();
  DualGraph g = [&] {
    if (n >= 15) {
      const std::array<std::pair<Index, Index>, 2> extra{{{2, 15}, {6, 13}}};
      return build_cycle_plus(n, extra);
    }
    if (n >= 3) return build_cycle_plus(n, {});
    return build_path(n);
  }();
  return {std::move(d), n, g.edges()};
}

inline Json to_json(const DualGraph &g) {
  Json edges = Json::array();
  for (const auto &e : g.edges()) edges.push_back(Json::array({e.from + 1, e.to + 1, e.weight}));
  return Json{{"nodes", g.nodes()}, {"edges", edges}};
}

inline Json to_json(const Instance &inst) {
  Json j;
  j["format"] = "sgnep-instance";
  j["version"] = 1;
  j["kind"] = std::string(to_string(inst.kind()));
  const GameSpec game = inst.game();
  j["name"] = game.name();
  Json dims = Json::array();
  for (Index d : game.dims()) dims.push_back(d);
  j["dims"] = dims;
  j["coupling_rows"] = game.coupling_rows();

  if (const auto *p = std::get_if<BilinearParams>(&inst.data)) {
    j["bilinear"] = {{"variant", std::string(to_string(p->variant))},
                     {"noise_mean", p->noise_mean},
                     {"noise_sigma", p->noise_sigma}};
  } else if (const auto *d = std::get_if<CournotData>(&inst.data)) {
    Json part = Json::array();
    for (const auto &mk : d->participation) {
      Json row = Json::array();
      for (Index m : mk) row.push_back(m + 1);
      part.push_back(row);
    }
    Json limits = Json::array();
    for (const auto &v : d->production_limits) limits.push_back(io::vector_to_json(v));
    j["cournot"] = {{"seed", d->seed},
                    {"participation", part},
                    {"production_limits", limits},
                    {"capacities", io::vector_to_json(d->capacities)},
                    {"sensitivity", io::matrix_to_json(d->sensitivity)},
                    {"price_mean", io::vector_to_json(d->price_mean)},
                    {"price_sigma", d->price_sigma},
                    {"cost_slope", d->cost_slope},
                    {"cost_offsets", io::vector_to_json(d->cost_offsets)}};
  } else {
    const auto &a = std::get<AffineGameData>(inst.data);
    Json lower = Json::array(), upper = Json::array(), blocks = Json::array();
    for (const auto &box : a.local_sets) {
      lower.push_back(io::vector_to_json(box.lower()));
      upper.push_back(io::vector_to_json(box.upper()));
    }
    for (const auto &blk : a.blocks) blocks.push_back(io::matrix_to_json(blk));
    j["affine"] = {{"name", a.name},
                   {"lower", lower},
                   {"upper", upper},
                   {"blocks", blocks},
                   {"b", io::vector_to_json(a.b)},
                   {"M", io::matrix_to_json(a.M)},
                   {"q", io::vector_to_json(a.q)},
                   {"noise_sigma", io::vector_to_json(a.noise_sigma)}};
  }
  if (game.known_solution()) j["known_solution"] = io::vector_to_json(*game.known_solution());
  j["graph"] = to_json(inst.graph());
  return j;
}

inline std::pair<Index, std::vector<Edge>> graph_from_json(const Json &g) {
  const auto nodes = io::field<Index>(g, "nodes");
  std::vector<Edge> edges;
  for (const auto &e : io::field<Json>(g, "edges")) {
    if (!e.is_array() || e.size() < 2 || e.size() > 3) {
      throw InstanceError("graph edge must be [from, to] or [from, to, weight]");
    }
    edges.push_back({e[0].get<Index>() - 1, e[1].get<Index>() - 1, e.size() == 3 ? e[2].get<double>() : 1.0});
  }
  DualGraph::from_edges(nodes, edges);  // validates
  return {nodes, std::move(edges)};
}

inline Instance instance_from_json(const Json &j) {
  const auto kind = io::field<std::string>(j, "kind");
  Instance inst;
  try {
    if (kind == "bilinear") {
      const Json &s = io::section(j, "bilinear");
      BilinearParams p;
      p.variant = parse_bilinear_variant(s.value("variant", std::string(to_string(p.variant))));
      p.noise_mean = s.value("noise_mean", p.noise_mean);
      p.noise_sigma = s.value("noise_sigma", p.noise_sigma);
      inst.data = p;
    } else if (kind == "cournot") {
      const Json &s = io::section(j, "cournot");
      CournotData d;
      d.seed = s.value("seed", std::uint64_t{0});
      for (const auto &row : io::field<Json>(s, "participation")) {
        std::vector<Index> mk;
        for (const auto &m : row) mk.push_back(m.get<Index>() - 1);
        d.participation.push_back(std::move(mk));
      }
      for (const auto &row : io::field<Json>(s, "production_limits")) {
        d.production_limits.push_back(io::vector_from_json(row));
      }
      d.capacities = io::vector_from_json(io::field<Json>(s, "capacities"));
      d.sensitivity = io::matrix_from_json(io::field<Json>(s, "sensitivity"), d.capacities.size());
      d.price_mean = io::vector_from_json(io::field<Json>(s, "price_mean"));
      d.price_sigma = io::field<double>(s, "price_sigma");
      d.cost_slope = io::field<double>(s, "cost_slope");
      d.cost_offsets = s.contains("cost_offsets") ? io::vector_from_json(s.at("cost_offsets"))
                                                  : Vector::Zero(d.companies());
      inst.data = std::move(d);
    } else if (kind == "affine") {
      const Json &s = io::section(j, "affine");
      AffineGameData a;
      a.name = s.value("name", std::string("affine"));
      const auto lower = io::field<Json>(s, "lower");
      const auto upper = io::field<Json>(s, "upper");
      if (lower.size() != upper.size()) throw InstanceError("affine: lower/upper agent count");
      constexpr double inf = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < lower.size(); ++i) {
        a.local_sets.emplace_back(io::vector_from_json(lower[i], -inf), io::vector_from_json(upper[i], inf));
      }
      if (s.contains("blocks")) {
        std::size_t i = 0;
        for (const auto &blk : s.at("blocks")) {
          if (i >= a.local_sets.size()) throw InstanceError("affine: more blocks than agents");
          a.blocks.push_back(io::matrix_from_json(blk, a.local_sets[i++].dim()));
        }
      }
      a.b = s.contains("b") ? io::vector_from_json(s.at("b")) : Vector(0);
      a.M = io::matrix_from_json(io::field<Json>(s, "M"));
      a.q = io::vector_from_json(io::field<Json>(s, "q"));
      a.noise_sigma = s.contains("noise_sigma")
                          ? io::vector_from_json(s.at("noise_sigma"))
                          : Vector::Zero(static_cast<Index>(a.local_sets.size()));
      if (j.contains("known_solution")) a.known_solution = io::vector_from_json(j.at("known_solution"));
      inst.data = std::move(a);
    } else {
      throw InstanceError("unknown instance kind '" + kind + "'");
    }
    std::tie(inst.nodes, inst.edges) = graph_from_json(io::section(j, "graph"));
    inst.problem();  // validates the combination
  } catch (const InstanceError &) {
    throw;
  } catch (const std::exception &e) {
    throw InstanceError(std::string("invalid ") + kind + " instance: " + e.what());
  }
  return inst;
}

inline void write_text_file(const std::filesystem::path &path, const std::string &text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("write failed for " + path.string());
}

inline Json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline void write_instance(const std::filesystem::path &path, const Instance &inst) {
  write_text_file(path, to_json(inst).dump(2) + "\n");
}

inline Instance read_instance(const std::filesystem::path &path) {
  return instance_from_json(read_json_file(path));
}

}  // namespace sgnep
