#pragma once

// Procedurally generated training/test images: a soft color gradient
// background with randomly placed filled shapes, lightly blurred. These stand
// in for a real photo corpus wherever the toolkit needs image content with
// low-frequency structure.

#include <vector>

#include "lrbench/image.hpp"
#include "lrbench/rng.hpp"

namespace lrbench {

Image synthetic_image(int resolution, Rng& rng);

std::vector<Image> synthetic_dataset(int count, int resolution, Rng& rng);

}  // namespace lrbench
