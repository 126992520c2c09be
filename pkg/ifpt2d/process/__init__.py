# Process package: closed-form moments and transition kernel of the two-compartment OU model
