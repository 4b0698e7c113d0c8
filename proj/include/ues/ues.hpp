#pragma once

#include "ues/error.hpp"
#include "ues/geometry.hpp"
#include "ues/scene.hpp"
#include "ues/insight.hpp"
#include "ues/planner.hpp"
#include "ues/evaluation.hpp"
#include "ues/store.hpp"
#include "ues/service.hpp"
