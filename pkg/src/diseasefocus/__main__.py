from diseasefocus.cli import main

raise SystemExit(main())
