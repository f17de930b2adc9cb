#include "derain/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "derain/config.hpp"
#include "derain/errors.hpp"
#include "derain/png_io.hpp"

namespace fs = std::filesystem;

namespace derain {

std::string dataset_dir(const std::string& root, const std::string& split) {
    return (fs::path(root) / split).string();
}

void write_dataset(const std::string& root, const DatasetManifest& manifest,
                   const std::vector<RainExample>& examples) {
    const fs::path dir = fs::path(root) / manifest.split;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create dataset directory: " + dir.string());

    for (const RainExample& ex : examples) {
        write_image_png((dir / (ex.id + "_O.png")).string(), ex.rain, 16);
        write_image_png((dir / (ex.id + "_B.png")).string(), ex.background, 16);
        write_image_png((dir / (ex.id + "_S.png")).string(), ex.streak, 16);
        write_mask_png((dir / (ex.id + "_R.png")).string(), ex.mask);
    }
    json j = manifest;
    save_json_file((dir / "manifest.json").string(), j);
}

DatasetManifest load_manifest(const std::string& manifest_path) {
    json j = load_json_file(manifest_path);
    try {
        return j.get<DatasetManifest>();
    } catch (const json::exception& e) {
        throw DataError("invalid manifest " + manifest_path + ": " + e.what());
    }
}

std::vector<RainExample> load_dataset(const std::string& dir) {
    const fs::path base(dir);
    const std::string manifest_path = (base / "manifest.json").string();
    if (!fs::exists(manifest_path))
        throw DataError("dataset manifest not found: " + manifest_path);
    DatasetManifest manifest = load_manifest(manifest_path);

    std::vector<RainExample> out;
    out.reserve(manifest.examples.size());
    for (const ExampleRecord& rec : manifest.examples) {
        RainExample ex;
        ex.id = rec.id;
        ex.rain = read_image_png((base / (rec.id + "_O.png")).string());
        ex.background = read_image_png((base / (rec.id + "_B.png")).string());
        Image s = read_image_png((base / (rec.id + "_S.png")).string());
        ex.streak = with_channels(s, 1);
        ex.mask = read_mask_png((base / (rec.id + "_R.png")).string());
        if (rec.has_haze) {
            HazeParams hp;
            hp.alpha = rec.alpha;
            hp.atmospheric_light = rec.atmospheric_light;
            ex.haze = hp;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

namespace {

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read background file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64_hex(bytes);
}

}  // namespace

BackgroundSpec scan_background_dir(const std::string& path) {
    if (!fs::is_directory(path)) throw DataError("background directory not found: " + path);
    BackgroundSpec spec;
    spec.type = BackgroundSpec::Type::Directory;
    spec.path = path;
    for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            spec.files.push_back(entry.path().filename().string());
    }
    std::sort(spec.files.begin(), spec.files.end());
    if (spec.files.empty()) throw DataError("no PNG backgrounds in " + path);
    for (const auto& f : spec.files)
        spec.hashes.push_back(file_hash((fs::path(path) / f).string()));
    return spec;
}

void check_background_hashes(const BackgroundSpec& spec) {
    if (spec.type != BackgroundSpec::Type::Directory) return;
    if (spec.hashes.size() != spec.files.size()) return;  // older manifest without hashes
    for (size_t i = 0; i < spec.files.size(); ++i) {
        const std::string p = (fs::path(spec.path) / spec.files[i]).string();
        if (file_hash(p) != spec.hashes[i])
            throw DataError("background file changed since the manifest was written: " + p);
    }
}

}  // namespace derain
