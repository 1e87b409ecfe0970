CLI_CONFIG = {
    # Artifact file names inside the results directory
    "surfel_map": "surfels.srfl",
    "db_features": "db_features.feat",
    "db_trajectory": "db_trajectory.txt",
    "db_ground_truth": "db_ground_truth.gtru",
    "query_features": "query_features.feat",
    "query_trajectory": "query_trajectory.txt",
    "query_ground_truth": "query_ground_truth.gtru",
    "manifest": "manifest.json",
    "database": "database.vsdb",
    "frame_reports": "frame_reports.jsonl",
    "optimization_report": "optimization_report.json",
    "optimization_cost": "optimization_cost.csv",
    "results": "results.txt",
    "reloc_traces": "reloc_traces.jsonl",
    "eval_dir": "eval",
    # Environment
    "log_level_env": "SURFELRELOC_LOG_LEVEL",
}
