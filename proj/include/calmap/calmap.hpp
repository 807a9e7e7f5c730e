#pragma once

#include "calmap/augment.hpp"
#include "calmap/checkpoint.hpp"
#include "calmap/config.hpp"
#include "calmap/decoder.hpp"
#include "calmap/density.hpp"
#include "calmap/dmap_io.hpp"
#include "calmap/encoder.hpp"
#include "calmap/errors.hpp"
#include "calmap/eval.hpp"
#include "calmap/figures.hpp"
#include "calmap/grid.hpp"
#include "calmap/image_io.hpp"
#include "calmap/manifest.hpp"
#include "calmap/networks.hpp"
#include "calmap/normalize.hpp"
#include "calmap/occasion.hpp"
#include "calmap/reference.hpp"
#include "calmap/seeds.hpp"
#include "calmap/split.hpp"
#include "calmap/synth.hpp"
#include "calmap/types.hpp"
