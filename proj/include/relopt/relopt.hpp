#pragma once

#include "relopt/collision.hpp"
#include "relopt/dual.hpp"
#include "relopt/energy.hpp"
#include "relopt/error.hpp"
#include "relopt/evaluation.hpp"
#include "relopt/io.hpp"
#include "relopt/math.hpp"
#include "relopt/optimizer.hpp"
#include "relopt/pano.hpp"
#include "relopt/render.hpp"
#include "relopt/relations.hpp"
#include "relopt/scene.hpp"
#include "relopt/synth.hpp"
