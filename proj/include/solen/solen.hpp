#pragma once

// Umbrella header for the full toolkit.

#include "solen/error.hpp"
#include "solen/experiment.hpp"
#include "solen/geometry.hpp"
#include "solen/lens.hpp"
#include "solen/material.hpp"
#include "solen/raytrace.hpp"
#include "solen/scene.hpp"
#include "solen/svg.hpp"
#include "solen/textio.hpp"
