"""Normals to the boundary of convex polytopes.

The squared distance from an interior point y to the boundary of a simple
polytope has its critical points at bases of normals from y.  This package
enumerates them, classifies faces as nice or skew through their spherical
links, checks the two-red-one-blue coloring obstruction and searches for
points with many normals.
"""

from .errors import ConsistencyAlarm, PolynormalsError
from .geometry import (Cone, Face, GenericityReport, Polytope, build_polytope, check_genericity,
                       cone_of_face, in_relative_interior, polytope_from_halfspaces,
                       project_to_affine_hull)
from .normals import (ActiveRegion, MorseTally, NormalRecord, SegmentScan, active_region,
                      morse_tally, normals_from_point, region_table, scan_segment)
from .spherical import (SphericalPolytope, SphericalTriangle, TriangleClassification,
                        acute_edge_cycle, classify_triangle, minmax_center,
                        skew_signature_check, spherical_link, spherical_sqd_critical_points,
                        verify_eight_short_criticals)
from .nicefaces import (ConeCriticalReport, NiceCertificate, NotFound, certify_nice,
                        check_propagation, cone_sqd_critical_points)
from .coloring import (ColoringInstance, find_coloring, instance_from_polytope,
                       simplex_instance, vertex_cut_instance)
from .search import (GeneratorSpec, SearchReport, canned_polytope, max_normals_search,
                     random_simple_polytope, skew_census, verify_theorem)

__version__ = "0.1.0"
