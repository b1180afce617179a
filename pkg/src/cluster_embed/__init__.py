"""Cluster the data, embed each cluster in the plane, then align the clusters rigidly."""
from .align import (AlignmentConfig, ClusterGeometry, GlobalEmbedding, RigidTransform, align,
                    alpha_heuristic, apply_transform, cluster_geometry, initialize_transforms, stress)
from .cluster import NOISE, ClusterAssignment, dbscan, kmeans, restrict
from .dissim import (DataMatrix, DissimilarityMatrix, KnnGraph, build_knn_graph, euclidean_pairwise,
                     geodesic_pairwise)
from .embed import (ClusterEmbedding, LoeConfig, classical_scaling_embed, embed_all_clusters, loe_embed,
                    pca_embed, scale_sync)
from .metrics import (MetricsReport, class_preservation, knn_recall, normalized_stress, rand_index,
                      spearman)

__version__ = "0.1.0"
