#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "advplace/field.hpp"
#include "advplace/partition.hpp"
#include "advplace/transfer.hpp"

namespace advplace::cli {

/// Parsed view of a run configuration file. Relative paths inside the file
/// resolve against the file's directory.
class RunConfig {
 public:
  RunConfig(nlohmann::json doc, std::filesystem::path base_dir);

  static RunConfig load(const std::filesystem::path& file);

  const nlohmann::json& doc() const { return doc_; }
  std::filesystem::path resolve(const std::string& path) const;

  void override_seed(std::uint64_t seed) { seed_override_ = seed; }
  std::uint64_t seed() const;

  VectorField field() const;
  BoxPartition partition() const;
  double dt() const;
  /// K directly, or round(tau / dt).
  std::size_t steps() const;
  BuildOptions build_options() const;
  /// Loads `operator` when given, otherwise builds from the field.
  TransferOperator transfer_operator() const;

  CellSet set(const BoxPartition& partition, const std::string& name) const;
  std::map<std::string, CellSet> sets(const BoxPartition& partition) const;

  /// Object for a command section; empty object when absent.
  nlohmann::json section(const std::string& name) const;

  /// Field specs: {"zero": true}, {"indicator": set, "scale": s},
  /// {"complement": set, "scale": s} or {"csv": path}.
  ScalarField scalar_field(const BoxPartition& partition, const nlohmann::json& spec,
                           const std::string& what) const;

 private:
  nlohmann::json doc_;
  std::filesystem::path base_dir_;
  std::optional<std::uint64_t> seed_override_;
};

/// Typed lookups that turn JSON type errors into InputError naming the key.
double get_number(const nlohmann::json& obj, const std::string& key, const std::string& where);
double get_number_or(const nlohmann::json& obj, const std::string& key, double fallback,
                     const std::string& where);
std::size_t get_count(const nlohmann::json& obj, const std::string& key, const std::string& where);
std::size_t get_count_or(const nlohmann::json& obj, const std::string& key, std::size_t fallback,
                         const std::string& where);
std::string get_string(const nlohmann::json& obj, const std::string& key,
                       const std::string& where);
std::string get_string_or(const nlohmann::json& obj, const std::string& key,
                          const std::string& fallback, const std::string& where);
bool get_bool_or(const nlohmann::json& obj, const std::string& key, bool fallback,
                 const std::string& where);

}  // namespace advplace::cli
