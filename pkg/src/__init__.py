# PPP-B2b toolkit - source modules
