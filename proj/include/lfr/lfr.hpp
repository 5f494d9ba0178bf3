#pragma once

// Umbrella header (the HTTP service is separate: lfr/service.hpp).

#include "lfr/camera.hpp"
#include "lfr/chunking.hpp"
#include "lfr/display.hpp"
#include "lfr/error.hpp"
#include "lfr/eval.hpp"
#include "lfr/image.hpp"
#include "lfr/interlace.hpp"
#include "lfr/metrics.hpp"
#include "lfr/parallel.hpp"
#include "lfr/pipeline.hpp"
#include "lfr/raster.hpp"
#include "lfr/scene.hpp"
#include "lfr/swizzle.hpp"
