#include "derain/config.hpp"

#include <fstream>

#include "derain/errors.hpp"

namespace derain {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open JSON file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

void save_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open JSON file for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw DataError("failed writing JSON file: " + path);
}

}  // namespace derain
