from antituring.cli import main

raise SystemExit(main())
