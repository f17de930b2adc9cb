#pragma once
#include <string>
#include <vector>

#include "derain/synthesis.hpp"

namespace derain {

// On-disk dataset layout, one directory per split:
//   {root}/{split}/{id}_O.png   rain image, 16-bit RGB
//   {root}/{split}/{id}_B.png   background, 16-bit RGB
//   {root}/{split}/{id}_S.png   combined streak layer, 16-bit gray
//   {root}/{split}/{id}_R.png   rain mask, 8-bit gray {0,255}
//   {root}/{split}/manifest.json
// The manifest fully determines the pixel data; regeneration from it is
// bit-identical.

std::string dataset_dir(const std::string& root, const std::string& split);

void write_dataset(const std::string& root, const DatasetManifest& manifest,
                   const std::vector<RainExample>& examples);

DatasetManifest load_manifest(const std::string& manifest_path);

// Loads the examples of a split directory (reads the PNGs).
std::vector<RainExample> load_dataset(const std::string& dir);

// Resolves a directory of background PNGs into a BackgroundSpec (sorted file
// list plus content hashes).
BackgroundSpec scan_background_dir(const std::string& path);

// Verifies recorded background hashes still match the files on disk.
void check_background_hashes(const BackgroundSpec& spec);

}  // namespace derain
