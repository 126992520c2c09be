# Storage package: CSV and JSON result files
