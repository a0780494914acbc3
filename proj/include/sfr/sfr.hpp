// Umbrella header.
#pragma once

#include "sfr/core.hpp"
#include "sfr/curves.hpp"
#include "sfr/decoder.hpp"
#include "sfr/field.hpp"
#include "sfr/io.hpp"
#include "sfr/losses.hpp"
#include "sfr/mesher.hpp"
#include "sfr/metrics.hpp"
#include "sfr/pipeline.hpp"
#include "sfr/pyramid.hpp"
#include "sfr/scene.hpp"
#include "sfr/spatial.hpp"
#include "sfr/train.hpp"
