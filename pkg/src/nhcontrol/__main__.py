from nhcontrol.cli import main

main()
