# tandemnet data ingestion package
