#pragma once

#include <map>
#include <string>
#include <vector>

namespace nspda {

// Minimal structured text document: scalar fields plus named flat tensors,
// written with 17 significant digits so doubles round-trip exactly.
struct TextDoc {
  std::map<std::string, std::string> fields;
  std::map<std::string, std::vector<double>> tensors;

  std::string field(const std::string& key) const;              // throws if absent
  std::string field_or(const std::string& key, std::string dflt) const;
  const std::vector<double>& tensor(const std::string& key) const;

  std::string serialize(const std::string& magic) const;
  // Throws CheckpointError on bad magic, version, or parse failure.
  static TextDoc parse(const std::string& text, const std::string& magic);
};

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace nspda
