#include "nspda/textio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nspda/errors.hpp"

namespace nspda {

std::string TextDoc::field(const std::string& key) const {
  const auto it = fields.find(key);
  if (it == fields.end()) throw CheckpointError("missing field: " + key);
  return it->second;
}

std::string TextDoc::field_or(const std::string& key, std::string dflt) const {
  const auto it = fields.find(key);
  return it == fields.end() ? std::move(dflt) : it->second;
}

const std::vector<double>& TextDoc::tensor(const std::string& key) const {
  const auto it = tensors.find(key);
  if (it == tensors.end()) throw CheckpointError("missing tensor: " + key);
  return it->second;
}

std::string TextDoc::serialize(const std::string& magic) const {
  std::ostringstream os;
  os << magic << " format_version=1\n";
  for (const auto& [k, v] : fields) os << k << '=' << v << '\n';
  char buf[32];
  for (const auto& [name, values] : tensors) {
    os << "tensor " << name << ' ' << values.size() << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", values[i]);
      os << buf << (i + 1 == values.size() ? '\n' : ' ');
    }
    if (values.empty()) os << '\n';
  }
  os << "end\n";
  return os.str();
}

TextDoc TextDoc::parse(const std::string& text, const std::string& magic) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind(magic + " ", 0) != 0) {
    throw CheckpointError("bad file magic, expected " + magic);
  }
  if (line.find("format_version=1") == std::string::npos) {
    throw CheckpointError("unsupported format version in: " + line);
  }
  TextDoc doc;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "end") return doc;
    if (line.rfind("tensor ", 0) == 0) {
      std::istringstream hs(line);
      std::string kw, name;
      std::size_t n = 0;
      hs >> kw >> name >> n;
      if (!std::getline(is, line)) throw CheckpointError("truncated tensor " + name);
      std::istringstream vs(line);
      std::vector<double> values;
      values.reserve(n);
      double v;
      while (vs >> v) values.push_back(v);
      if (values.size() != n) {
        throw CheckpointError("tensor " + name + " expected " + std::to_string(n) +
                              " values, got " + std::to_string(values.size()));
      }
      doc.tensors.emplace(name, std::move(values));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("unparsable line: " + line);
    doc.fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  throw CheckpointError("missing end marker");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

}  // namespace nspda
