"""Fast independent vector extraction of one source from a multichannel mixture."""
