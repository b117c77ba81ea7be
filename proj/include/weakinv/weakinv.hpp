#pragma once

#include "errors.hpp"
#include "sampling.hpp"
#include "lie_group.hpp"
#include "vector_field_g.hpp"
#include "manifold.hpp"
#include "action.hpp"
#include "vector_field_m.hpp"
#include "invariance.hpp"
#include "flows.hpp"
#include "cascade.hpp"
